#pragma once

#include <cstdio>
#include <string>

namespace forge {

// Minimal SVG emitter for the static report images.
class SvgCanvas {
public:
    SvgCanvas(double width, double height) : width_(width), height_(height) {}

    void rect(double x, double y, double w, double h, const std::string &fill, const std::string &extra = {}) {
        body_ += "<rect x=\"" + num(x) + "\" y=\"" + num(y) + "\" width=\"" + num(w) + "\" height=\"" + num(h) +
                 "\" fill=\"" + fill + "\"" + (extra.empty() ? "" : " " + extra) + "/>\n";
    }

    void line(double x1, double y1, double x2, double y2, const std::string &stroke, double width = 1.0,
              bool dashed = false) {
        body_ += "<line x1=\"" + num(x1) + "\" y1=\"" + num(y1) + "\" x2=\"" + num(x2) + "\" y2=\"" + num(y2) +
                 "\" stroke=\"" + stroke + "\" stroke-width=\"" + num(width) + "\"" +
                 (dashed ? " stroke-dasharray=\"6,4\"" : "") + "/>\n";
    }

    void text(double x, double y, const std::string &s, double size = 11.0, const std::string &anchor = "start") {
        body_ += "<text x=\"" + num(x) + "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"" + num(size) +
                 "\" text-anchor=\"" + anchor + "\">" + escape(s) + "</text>\n";
    }

    void polyline(const std::string &points, const std::string &stroke) {
        body_ += "<polyline points=\"" + points + "\" fill=\"none\" stroke=\"" + stroke + "\" stroke-width=\"2\"/>\n";
    }

    std::string str() const {
        return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width_) + "\" height=\"" + num(height_) +
               "\" viewBox=\"0 0 " + num(width_) + " " + num(height_) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" +
               body_ + "</svg>\n";
    }

    static std::string num(double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.2f", v);
        return buf;
    }

    static std::string rgb(int r, int g, int b) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
        return buf;
    }

private:
    static std::string escape(const std::string &s) {
        std::string out;
        for (char c : s) {
            switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out.push_back(c);
            }
        }
        return out;
    }

    double width_, height_;
    std::string body_;
};

} // namespace forge
