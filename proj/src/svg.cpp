#include "pullback/svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>

#include "pullback/errors.hpp"

namespace pullback {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                              "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string fixed(double v, int precision = 2) {
    std::array<char, 64> buf{};
    if (v == 0.0) v = 0.0;  // no "-0.00"
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, precision);
    if (ec != std::errc()) return "0";
    std::string s(buf.data(), end);
    if (s == "-0.00") s = "0.00";
    return s;
}

std::string tick(double v) {
    std::array<char, 64> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general, 3);
    return ec == std::errc() ? std::string(buf.data(), end) : "?";
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0;
    double hi = 1.0;
};

Range padded(double lo, double hi) {
    if (!(lo <= hi)) return {0.0, 1.0};
    if (lo == hi) {
        const double pad = lo == 0.0 ? 1.0 : 0.5 * std::abs(lo);
        return {lo - pad, hi + pad};
    }
    return {lo, hi};
}

class Canvas {
public:
    Canvas(const ChartLabels& labels, Range x, Range y, bool log_x) : x_(x), y_(y), log_x_(log_x) {
        out_ += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(kWidth, 0) + "\" height=\"" +
                fixed(kHeight, 0) + "\" viewBox=\"0 0 " + fixed(kWidth, 0) + " " + fixed(kHeight, 0) + "\">\n";
        out_ += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out_ += "<text x=\"" + fixed(kWidth / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
                "font-size=\"15\">" + escape(labels.title) + "</text>\n";
        axes(labels);
    }

    double px(double x) const {
        const double lo = log_x_ ? std::log10(x_.lo) : x_.lo;
        const double hi = log_x_ ? std::log10(x_.hi) : x_.hi;
        const double v = log_x_ ? std::log10(x) : x;
        return kLeft + (v - lo) / (hi - lo) * (kWidth - kLeft - kRight);
    }
    double py(double y) const { return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom); }

    void raw(const std::string& s) { out_ += s; }
    std::string finish() {
        out_ += "</svg>\n";
        return std::move(out_);
    }

private:
    void axes(const ChartLabels& labels) {
        const double x0 = kLeft;
        const double x1 = kWidth - kRight;
        const double y0 = kHeight - kBottom;
        const double y1 = kTop;
        out_ += "<g stroke=\"black\" stroke-width=\"1\">\n";
        out_ += "<line x1=\"" + fixed(x0) + "\" y1=\"" + fixed(y0) + "\" x2=\"" + fixed(x1) + "\" y2=\"" + fixed(y0) + "\"/>\n";
        out_ += "<line x1=\"" + fixed(x0) + "\" y1=\"" + fixed(y0) + "\" x2=\"" + fixed(x0) + "\" y2=\"" + fixed(y1) + "\"/>\n";
        out_ += "</g>\n<g font-family=\"sans-serif\" font-size=\"11\">\n";
        for (int i = 0; i <= 4; ++i) {
            const double t = i / 4.0;
            const double xv = log_x_ ? std::pow(10.0, std::log10(x_.lo) + t * (std::log10(x_.hi) - std::log10(x_.lo)))
                                     : x_.lo + t * (x_.hi - x_.lo);
            const double yv = y_.lo + t * (y_.hi - y_.lo);
            out_ += "<text x=\"" + fixed(px(xv)) + "\" y=\"" + fixed(y0 + 16) + "\" text-anchor=\"middle\">" +
                    tick(xv) + "</text>\n";
            out_ += "<text x=\"" + fixed(x0 - 6) + "\" y=\"" + fixed(py(yv) + 4) + "\" text-anchor=\"end\">" +
                    tick(yv) + "</text>\n";
        }
        out_ += "<text x=\"" + fixed((x0 + x1) / 2) + "\" y=\"" + fixed(kHeight - 12) + "\" text-anchor=\"middle\">" +
                escape(labels.x_label) + "</text>\n";
        out_ += "<text x=\"16\" y=\"" + fixed((y0 + y1) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
                fixed((y0 + y1) / 2) + ")\">" + escape(labels.y_label) + "</text>\n";
        out_ += "</g>\n";
    }

    std::string out_;
    Range x_;
    Range y_;
    bool log_x_;
};

}  // namespace

std::vector<std::size_t> histogram_counts(std::span<const double> values, std::size_t bins, double& lo, double& hi) {
    if (bins == 0) throw InvalidArgument("histogram: bin count must be at least 1");
    std::vector<std::size_t> counts(bins, 0);
    lo = INFINITY;
    hi = -INFINITY;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(lo <= hi)) {
        lo = 0.0;
        hi = 1.0;
        return counts;
    }
    const Range r = padded(lo, hi);
    lo = r.lo;
    hi = r.hi;
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        auto b = static_cast<std::size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
        counts[std::min(b, bins - 1)]++;
    }
    return counts;
}

std::string line_chart_svg(const ChartLabels& labels, const std::vector<Series>& series, bool log_x) {
    double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
    for (const Series& s : series) {
        const std::size_t n = std::min(s.x.size(), s.y.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (log_x && !(s.x[i] > 0.0))) continue;
            xlo = std::min(xlo, s.x[i]);
            xhi = std::max(xhi, s.x[i]);
            ylo = std::min(ylo, s.y[i]);
            yhi = std::max(yhi, s.y[i]);
        }
    }
    Range xr = padded(xlo, xhi);
    if (log_x) {
        if (!(xlo <= xhi)) xr = {1.0, 10.0};
        else if (xlo == xhi) xr = {xlo / 2.0, xhi * 2.0};
    }
    Canvas c(labels, xr, padded(ylo, yhi), log_x);
    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kPalette[si % kPalette.size()];
        std::string points;
        const std::size_t n = std::min(s.x.size(), s.y.size());
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i]) || (log_x && !(s.x[i] > 0.0))) continue;
            if (!points.empty()) points += ' ';
            points += fixed(c.px(s.x[i])) + "," + fixed(c.py(s.y[i]));
        }
        if (!points.empty()) {
            c.raw("<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + points +
                  "\"/>\n");
        }
        if (!s.name.empty()) {
            const double ly = kTop + 14.0 * static_cast<double>(si);
            c.raw("<text x=\"" + fixed(kWidth - kRight - 4) + "\" y=\"" + fixed(ly + 10) +
                  "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" + color + "\">" +
                  escape(s.name) + "</text>\n");
        }
    }
    return c.finish();
}

std::string histogram_svg(const ChartLabels& labels, std::span<const double> values, std::size_t bins) {
    double lo = 0.0, hi = 1.0;
    const std::vector<std::size_t> counts = histogram_counts(values, bins, lo, hi);
    std::size_t top = 0;
    for (std::size_t n : counts) top = std::max(top, n);
    Canvas c(labels, {lo, hi}, {0.0, top == 0 ? 1.0 : static_cast<double>(top)}, false);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (std::size_t b = 0; b < counts.size(); ++b) {
        if (counts[b] == 0) continue;
        const double x0 = c.px(lo + width * static_cast<double>(b));
        const double x1 = c.px(lo + width * static_cast<double>(b + 1));
        const double y = c.py(static_cast<double>(counts[b]));
        c.raw("<rect x=\"" + fixed(x0) + "\" y=\"" + fixed(y) + "\" width=\"" + fixed(x1 - x0) + "\" height=\"" +
              fixed(c.py(0.0) - y) + "\" fill=\"#1f77b4\" stroke=\"white\" stroke-width=\"0.5\"/>\n");
    }
    return c.finish();
}

}  // namespace pullback
