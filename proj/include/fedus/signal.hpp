#pragma once

#include "fedus/signal/fft.hpp"
#include "fedus/signal/filters.hpp"
#include "fedus/signal/normalize.hpp"
#include "fedus/signal/resample.hpp"
#include "fedus/signal/spectral.hpp"
#include "fedus/signal/waveform.hpp"
