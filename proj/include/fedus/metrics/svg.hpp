#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "fedus/error.hpp"
#include "fedus/metrics/metrics.hpp"

namespace fedus::metrics {

/// Minimal fixed-size SVG chart: line series, scatter series and horizontal rules.
class SvgPlot {
public:
    struct Series {
        std::string label, color;
        std::vector<double> x, y;
        bool scatter = false;
    };
    struct Rule {
        double y;
        std::string label, color;
    };

    SvgPlot(std::string title, std::string x_label, std::string y_label)
        : title_(std::move(title)), x_label_(std::move(x_label)), y_label_(std::move(y_label)) {}

    void line(std::string label, std::string color, std::vector<double> x, std::vector<double> y) {
        add({std::move(label), std::move(color), std::move(x), std::move(y), false});
    }
    void scatter(std::string label, std::string color, std::vector<double> x, std::vector<double> y) {
        add({std::move(label), std::move(color), std::move(x), std::move(y), true});
    }
    void rule(double y, std::string label, std::string color) { rules_.push_back({y, std::move(label), std::move(color)}); }

    std::string render() const {
        double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
        for (const auto& s : series_) {
            for (double v : s.x) x0 = std::min(x0, v), x1 = std::max(x1, v);
            for (double v : s.y) y0 = std::min(y0, v), y1 = std::max(y1, v);
        }
        for (const auto& r : rules_) y0 = std::min(y0, r.y), y1 = std::max(y1, r.y);
        if (!(x0 <= x1)) x0 = 0, x1 = 1;
        if (!(y0 <= y1)) y0 = 0, y1 = 1;
        if (x1 - x0 < 1e-12) x0 -= 0.5, x1 += 0.5;
        if (y1 - y0 < 1e-12) y0 -= 0.5, y1 += 0.5;
        const double pad = 0.05 * (y1 - y0);
        y0 -= pad, y1 += pad;

        const double W = 720, H = 440, L = 70, R = 20, T = 40, B = 50;
        auto px = [&](double v) { return L + (v - x0) / (x1 - x0) * (W - L - R); };
        auto py = [&](double v) { return H - B - (v - y0) / (y1 - y0) * (H - T - B); };

        std::string s;
        s += fmt("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" font-family=\"sans-serif\" font-size=\"12\">\n", W, H);
        s += fmt("<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n", W, H);
        s += fmt("<text x=\"%g\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">", W / 2) + escape(title_) + "</text>\n";
        s += fmt("<rect x=\"%g\" y=\"%g\" width=\"%g\" height=\"%g\" fill=\"none\" stroke=\"#444\"/>\n", L, T, W - L - R, H - T - B);
        for (int i = 0; i <= 4; ++i) {
            const double xv = x0 + (x1 - x0) * i / 4.0, yv = y0 + (y1 - y0) * i / 4.0;
            s += fmt("<text x=\"%.2f\" y=\"%g\" text-anchor=\"middle\">%.4g</text>\n", px(xv), H - B + 16, xv);
            s += fmt("<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\">%.4g</text>\n", L - 6, py(yv) + 4, yv);
        }
        s += fmt("<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">", (W + L - R) / 2, H - 12) + escape(x_label_) + "</text>\n";
        s += fmt("<text x=\"16\" y=\"%g\" text-anchor=\"middle\" transform=\"rotate(-90 16 %g)\">", (H + T - B) / 2, (H + T - B) / 2) +
             escape(y_label_) + "</text>\n";
        for (const auto& r : rules_) {
            s += fmt("<line x1=\"%g\" x2=\"%g\" y1=\"%.2f\" y2=\"%.2f\" stroke=\"", L, W - R, py(r.y), py(r.y)) + r.color +
                 "\" stroke-dasharray=\"6 4\"/>\n";
            s += fmt("<text x=\"%g\" y=\"%.2f\" text-anchor=\"end\" fill=\"", W - R - 4, py(r.y) - 4) + r.color + "\">" +
                 escape(r.label) + "</text>\n";
        }
        int legend = 0;
        for (const auto& ser : series_) {
            if (ser.scatter) {
                for (std::size_t i = 0; i < ser.x.size(); ++i)
                    s += fmt("<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2.5\" fill=\"", px(ser.x[i]), py(ser.y[i])) + ser.color +
                         "\" fill-opacity=\"0.6\"/>\n";
            } else {
                s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\" points=\"";
                for (std::size_t i = 0; i < ser.x.size(); ++i) s += fmt("%.2f,%.2f ", px(ser.x[i]), py(ser.y[i]));
                s += "\"/>\n";
            }
            const double ly = T + 16 + 16 * legend++;
            s += fmt("<rect x=\"%g\" y=\"%g\" width=\"12\" height=\"4\" fill=\"", L + 10, ly - 4) + ser.color + "\"/>\n";
            s += fmt("<text x=\"%g\" y=\"%g\">", L + 28, ly) + escape(ser.label) + "</text>\n";
        }
        return s + "</svg>\n";
    }

    void save(const std::string& path) const {
        const auto text = render();
        std::FILE* f = std::fopen(path.c_str(), "wb");
        if (!f) throw DataError("cannot open for writing: " + path);
        std::fwrite(text.data(), 1, text.size(), f);
        if (std::fclose(f) != 0) throw DataError("write failed: " + path);
    }

private:
    void add(Series s) {
        if (s.x.size() != s.y.size()) throw std::invalid_argument("SvgPlot: x and y differ in length");
        series_.push_back(std::move(s));
    }
    template <class... A>
    static std::string fmt(const char* f, A... a) {
        char buf[512];
        std::snprintf(buf, sizeof buf, f, a...);
        return buf;
    }
    static std::string escape(const std::string& in) {
        std::string out;
        for (char c : in) {
            if (c == '<') out += "&lt;";
            else if (c == '>') out += "&gt;";
            else if (c == '&') out += "&amp;";
            else out += c;
        }
        return out;
    }

    std::string title_, x_label_, y_label_;
    std::vector<Series> series_;
    std::vector<Rule> rules_;
};

/// Mean real and generated spectra (dB) on one chart.
inline void write_psd_svg(const std::string& path, const signal::PsdEstimate& real, const signal::PsdEstimate& gen,
                          const std::string& title = "Mean power spectral density") {
    SvgPlot plot(title, "Frequency (Hz)", "Power (dB/Hz)");
    plot.line("real DUS", "#1f77b4", real.freqs, to_db(real.power));
    plot.line("generated DUS", "#d62728", gen.freqs, to_db(gen.power));
    plot.save(path);
}

} // namespace fedus::metrics
