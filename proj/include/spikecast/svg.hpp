// SPDX-License-Identifier: Apache-2.0
#pragma once

// Static per-scene SVG overlays: observed history, ground-truth future, and
// the top-probability predicted mode with per-maneuver probabilities.

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "spikecast/data.hpp"
#include "spikecast/decoder.hpp"

namespace spikecast::svg {

namespace detail {

struct Mapper {
    double min_x = 0, max_x = 1, min_y = 0, max_y = 1;
    double w = 860, h = 420, margin = 40;

    void expand(double x, double y) {
        min_x = std::min(min_x, x);
        max_x = std::max(max_x, x);
        min_y = std::min(min_y, y);
        max_y = std::max(max_y, y);
    }

    double sx(double x) const {
        return margin + (x - min_x) / std::max(max_x - min_x, 1e-9) * (w - 2 * margin);
    }
    // +y (left in road coordinates) points up in the image
    double sy(double y) const {
        return h - margin - (y - min_y) / std::max(max_y - min_y, 1e-9) * (h - 2 * margin);
    }
};

inline std::string polyline(const Mapper& m, const data::Track2d& pts, const std::string& color,
                            bool dashed) {
    std::string s = "  <polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"2\"";
    if (dashed) s += " stroke-dasharray=\"6 4\"";
    s += " points=\"";
    char buf[64];
    for (const auto& p : pts) {
        std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", m.sx(p[0]), m.sy(p[1]));
        s += buf;
    }
    s += "\"/>\n";
    return s;
}

}  // namespace detail

inline void write_scene_svg(const std::string& path, const data::SceneSample& sample,
                            const gmm::MultimodalPrediction& pred, const std::string& digest,
                            std::uint64_t seed) {
    detail::Mapper m;
    bool first = true;
    auto expand_track = [&](const scene::TrajectoryTrack& t) {
        for (const auto& p : t.points) {
            if (first) {
                m.min_x = m.max_x = p.x;
                m.min_y = m.max_y = p.y;
                first = false;
            }
            m.expand(p.x, p.y);
        }
    };
    expand_track(sample.window.target);
    for (const auto& nb : sample.window.neighbors) expand_track(nb);
    for (std::size_t t = 0; t < sample.future.shape[0]; ++t) {
        m.expand(sample.future.at(t, 0), sample.future.at(t, 1));
    }
    std::size_t best = pred.argmax_mode();
    for (const auto& p : pred.mode_mean(best)) m.expand(p[0], p[1]);

    auto to_track2d = [](const scene::TrajectoryTrack& t) {
        data::Track2d out;
        for (const auto& p : t.points) out.push_back({p.x, p.y});
        return out;
    };

    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_scene_svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << m.w << "\" height=\"" << m.h
        << "\">\n";
    out << "  <!-- config_digest=" << digest << " seed=" << seed << " scene=" << sample.scene_id
        << " -->\n";
    out << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& nb : sample.window.neighbors) {
        out << detail::polyline(m, to_track2d(nb), "#b0b0b0", false);
    }
    out << detail::polyline(m, to_track2d(sample.window.target), "#1f77b4", false);
    data::Track2d gt;
    for (std::size_t t = 0; t < sample.future.shape[0]; ++t) {
        gt.push_back({sample.future.at(t, 0), sample.future.at(t, 1)});
    }
    out << detail::polyline(m, gt, "#2ca02c", false);
    out << detail::polyline(m, pred.mode_mean(best), "#d62728", true);

    double ty = 16.0;
    out << "  <text x=\"8\" y=\"" << ty << "\" font-size=\"12\" fill=\"#333\">scene "
        << sample.scene_id << "  label=" << data::maneuver_name(sample.label) << "</text>\n";
    for (std::size_t c = 0; c < pred.modes(); ++c) {
        ty += 14.0;
        char buf[96];
        std::string mode =
            pred.modes() == data::kManeuvers ? data::maneuver_name(c) : "mode " + std::to_string(c);
        std::snprintf(buf, sizeof(buf), "p(%s)=%.3f%s", mode.c_str(), pred.maneuver_probs[c],
                      c == best ? " *" : "");
        out << "  <text x=\"8\" y=\"" << ty << "\" font-size=\"11\" fill=\""
            << (c == best ? "#d62728" : "#555") << "\">" << buf << "</text>\n";
    }
    out << "</svg>\n";
}

}  // namespace spikecast::svg
