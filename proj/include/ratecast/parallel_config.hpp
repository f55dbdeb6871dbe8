// The sampler's stage layout, written "f(6,12,24)m(1,2,4)" with an optional
// s(...) block for per-stage denoise steps: K frame rates in increasing
// order, the segment count M_i for each stage, and optionally the step count
// per stage (default 50 everywhere).
#pragma once

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "ratecast/errors.hpp"

namespace ratecast {

constexpr int kDefaultDenoiseSteps = 50;

struct ParallelConfig {
    std::vector<double> stage_fps;
    std::vector<int> stage_segments;
    std::vector<int> stage_steps;
    int analytic_w = 0;  // uniform branching factor for the closed-form bound; 0 = unset

    int stages() const { return int(stage_fps.size()); }

    void validate() const {
        check_config(!stage_fps.empty(), "parallel config needs at least one stage");
        check_config(stage_segments.size() == stage_fps.size() &&
                         stage_steps.size() == stage_fps.size(),
                     "stage list lengths disagree");
        for (double f : stage_fps) check_config(f > 0.0, "non-positive stage fps");
        for (int m : stage_segments) check_config(m >= 1, "segment count below 1");
        for (int s : stage_steps) check_config(s >= 1, "denoise step count below 1");
        for (std::size_t i = 1; i < stage_fps.size(); ++i) {
            const double ratio = stage_fps[i] / stage_fps[i - 1];
            check_config(ratio > 1.0, "stage fps must be strictly increasing");
            const double l = std::log2(ratio);
            check_config(std::abs(l - std::round(l)) < 1e-9,
                         "fps ratio " + std::to_string(ratio) + " is not a power of two");
        }
    }

    // Rate level of each stage relative to the finest stage: 2^level is the
    // subsampling stride at full rate. The last stage is level 0.
    std::vector<int> levels() const {
        std::vector<int> out(stage_fps.size());
        for (std::size_t i = 0; i < stage_fps.size(); ++i)
            out[i] = int(std::lround(std::log2(stage_fps.back() / stage_fps[i])));
        return out;
    }

    int stride(int stage) const { return 1 << levels()[std::size_t(stage)]; }
};

namespace detail {

struct ConfigCursor {
    const std::string& text;
    std::size_t pos = 0;

    void skip_space() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    bool done() {
        skip_space();
        return pos >= text.size();
    }
    char peek() {
        skip_space();
        return pos < text.size() ? text[pos] : '\0';
    }
    void expect(char c) {
        skip_space();
        if (pos >= text.size() || text[pos] != c)
            throw ParseError(std::string("expected '") + c + "'", pos);
        ++pos;
    }
    double number() {
        skip_space();
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(text.substr(pos), &used);
        } catch (const std::exception&) {
            throw ParseError("expected a number", pos);
        }
        pos += used;
        return v;
    }

    std::vector<double> group(char tag) {
        expect(tag);
        expect('(');
        std::vector<double> values;
        values.push_back(number());
        while (peek() == ',') {
            expect(',');
            values.push_back(number());
        }
        expect(')');
        return values;
    }
};

}  // namespace detail

inline ParallelConfig parse_config(const std::string& text) {
    detail::ConfigCursor cur{text};
    ParallelConfig cfg;

    cfg.stage_fps = cur.group('f');

    if (cur.peek() != 'm') throw ParseError("expected segment block m(...)", cur.pos);
    for (double m : cur.group('m')) {
        if (m < 1.0 || m != std::floor(m))
            throw ParseError("segment counts must be positive integers", cur.pos);
        cfg.stage_segments.push_back(int(m));
    }
    if (cfg.stage_segments.size() != cfg.stage_fps.size())
        throw ParseError("m(...) lists " + std::to_string(cfg.stage_segments.size()) +
                             " stages but f(...) lists " + std::to_string(cfg.stage_fps.size()),
                         cur.pos);

    if (cur.peek() == 's') {
        for (double s : cur.group('s')) {
            if (s < 1.0 || s != std::floor(s))
                throw ParseError("step counts must be positive integers", cur.pos);
            cfg.stage_steps.push_back(int(s));
        }
        if (cfg.stage_steps.size() != cfg.stage_fps.size())
            throw ParseError("s(...) lists " + std::to_string(cfg.stage_steps.size()) +
                                 " stages but f(...) lists " + std::to_string(cfg.stage_fps.size()),
                             cur.pos);
    } else {
        cfg.stage_steps.assign(cfg.stage_fps.size(), kDefaultDenoiseSteps);
    }
    if (!cur.done()) throw ParseError("trailing characters after config", cur.pos);

    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw ParseError(e.what(), text.size());
    }
    return cfg;
}

}  // namespace ratecast
