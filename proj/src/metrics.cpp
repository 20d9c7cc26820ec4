#include "lanedrop/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace lanedrop {

HeatmapGrid::HeatmapGrid(std::size_t space_cells, std::size_t time_cells, double cell_length, double cell_duration)
    : space_cells_(space_cells),
      time_cells_(time_cells),
      cell_length_(cell_length),
      cell_duration_(cell_duration),
      values_(space_cells * time_cells, 0.0),
      counts_(space_cells * time_cells, 0) {}

std::size_t HeatmapGrid::index(std::size_t space, std::size_t time) const {
    if (space >= space_cells_ || time >= time_cells_) {
        throw std::out_of_range("HeatmapGrid: cell index out of range");
    }
    return space * time_cells_ + time;
}

std::optional<double> HeatmapGrid::at(std::size_t space, std::size_t time) const {
    const std::size_t i = index(space, time);
    if (counts_[i] == 0) {
        return std::nullopt;
    }
    return values_[i];
}

std::size_t HeatmapGrid::samples(std::size_t space, std::size_t time) const {
    return counts_[index(space, time)];
}

void HeatmapGrid::set(std::size_t space, std::size_t time, double value, std::size_t samples) {
    const std::size_t i = index(space, time);
    values_[i] = value;
    counts_[i] = samples;
}

std::size_t HeatmapGrid::total_samples() const {
    std::size_t total = 0;
    for (auto c : counts_) {
        total += c;
    }
    return total;
}

void HeatmapGrid::write_csv(std::ostream& out) const {
    char buf[64];
    for (std::size_t s = 0; s < space_cells_; ++s) {
        for (std::size_t t = 0; t < time_cells_; ++t) {
            if (t > 0) {
                out << ',';
            }
            if (auto v = at(s, t)) {
                std::snprintf(buf, sizeof buf, "%.6f", *v);
                out << buf;
            }
        }
        out << '\n';
    }
}

SpeedGrids accumulate_grids(std::span<const TrajectoryRow> log, double corridor_length, double cell_length,
                            double cell_duration) {
    double last_time = 0.0;
    for (const auto& row : log) {
        if (!(row.position >= 0.0 && row.position < corridor_length)) {
            throw std::invalid_argument("accumulate_grids: sample for vehicle " + std::to_string(row.id) +
                                        " lies outside the corridor");
        }
        if (!(row.time >= 0.0)) {
            throw std::invalid_argument("accumulate_grids: negative sample time");
        }
        last_time = std::max(last_time, row.time);
    }
    const auto space_cells = static_cast<std::size_t>(std::ceil(corridor_length / cell_length));
    const auto time_cells = log.empty() ? 0 : static_cast<std::size_t>(std::floor(last_time / cell_duration)) + 1;

    std::vector<std::vector<double>> bins(space_cells * time_cells);
    for (const auto& row : log) {
        const auto s = static_cast<std::size_t>(std::floor(row.position / cell_length));
        const auto t = static_cast<std::size_t>(std::floor(row.time / cell_duration));
        bins[s * time_cells + t].push_back(row.speed * kMsToKmh);
    }

    SpeedGrids grids{HeatmapGrid(space_cells, time_cells, cell_length, cell_duration),
                     HeatmapGrid(space_cells, time_cells, cell_length, cell_duration)};
    for (std::size_t s = 0; s < space_cells; ++s) {
        for (std::size_t t = 0; t < time_cells; ++t) {
            const auto& cell = bins[s * time_cells + t];
            if (cell.empty()) {
                continue;
            }
            const double n = static_cast<double>(cell.size());
            double mean = 0.0;
            for (double v : cell) {
                mean += v;
            }
            mean /= n;
            double var = 0.0;
            for (double v : cell) {
                var += (v - mean) * (v - mean);
            }
            var /= n;
            grids.mean.set(s, t, mean, cell.size());
            grids.stddev.set(s, t, std::sqrt(var), cell.size());
        }
    }
    return grids;
}

int count_cells_below(const HeatmapGrid& grid, double threshold_kmh) {
    int count = 0;
    for (std::size_t s = 0; s < grid.space_cells(); ++s) {
        for (std::size_t t = 0; t < grid.time_cells(); ++t) {
            if (auto v = grid.at(s, t); v && *v < threshold_kmh) {
                ++count;
            }
        }
    }
    return count;
}

std::vector<int> episode_throughput(std::span<const EpisodeMetrics> metrics) {
    if (metrics.empty()) {
        throw std::invalid_argument("episode_throughput: no episodes");
    }
    std::vector<int> out;
    out.reserve(metrics.size());
    for (const auto& m : metrics) {
        out.push_back(m.throughput);
    }
    return out;
}

namespace {

struct Rgb {
    double r, g, b;
};

std::string ramp_color(double value, double vmax, ColorRamp ramp) {
    static constexpr std::array<Rgb, 3> stops{{{215, 48, 39}, {254, 224, 139}, {26, 152, 80}}};
    double x = vmax > 0.0 ? std::clamp(value / vmax, 0.0, 1.0) : 0.0;
    if (ramp == ColorRamp::deviation) {
        x = 1.0 - x;
    }
    const double pos = x * 2.0;
    const std::size_t lo = std::min<std::size_t>(static_cast<std::size_t>(pos), 1);
    const double f = pos - static_cast<double>(lo);
    const Rgb& a = stops[lo];
    const Rgb& b = stops[lo + 1];
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", static_cast<int>(std::lround(a.r + f * (b.r - a.r))),
                  static_cast<int>(std::lround(a.g + f * (b.g - a.g))),
                  static_cast<int>(std::lround(a.b + f * (b.b - a.b))));
    return buf;
}

} // namespace

void write_heatmap_svg(std::ostream& out, const HeatmapGrid& grid, ColorRamp ramp, double vmax_kmh,
                       const std::string& title) {
    constexpr int cell_w = 12;
    constexpr int cell_h = 16;
    constexpr int margin_left = 60;
    constexpr int margin_top = 30;
    constexpr int margin_bottom = 40;
    const int width = margin_left + static_cast<int>(grid.time_cells()) * cell_w + 20;
    const int height = margin_top + static_cast<int>(grid.space_cells()) * cell_h + margin_bottom;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height << "\">\n";
    out << "<text x=\"" << margin_left << "\" y=\"18\" font-family=\"sans-serif\" font-size=\"13\">" << title
        << "</text>\n";
    for (std::size_t s = 0; s < grid.space_cells(); ++s) {
        // upstream (s = 0) at the bottom
        const int y = margin_top + static_cast<int>(grid.space_cells() - 1 - s) * cell_h;
        for (std::size_t t = 0; t < grid.time_cells(); ++t) {
            const int x = margin_left + static_cast<int>(t) * cell_w;
            const auto v = grid.at(s, t);
            out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell_w << "\" height=\"" << cell_h
                << "\" fill=\"" << (v ? ramp_color(*v, vmax_kmh, ramp) : std::string("#bdbdbd")) << "\"/>\n";
        }
        out << "<text x=\"4\" y=\"" << y + cell_h - 4 << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << static_cast<int>(static_cast<double>(s) * grid.cell_length()) << " m</text>\n";
    }
    const int axis_y = margin_top + static_cast<int>(grid.space_cells()) * cell_h + 16;
    for (std::size_t t = 0; t < grid.time_cells(); t += 10) {
        out << "<text x=\"" << margin_left + static_cast<int>(t) * cell_w << "\" y=\"" << axis_y
            << "\" font-family=\"sans-serif\" font-size=\"10\">"
            << static_cast<int>(static_cast<double>(t) * grid.cell_duration()) << " s</text>\n";
    }
    out << "</svg>\n";
}

} // namespace lanedrop
