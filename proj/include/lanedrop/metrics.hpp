#pragma once

#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lanedrop/env.hpp"

namespace lanedrop {

inline constexpr double kMsToKmh = 3.6;

/// Space-time aggregation of speed samples (km/h). Cell (i, j) covers
/// positions [i * cell_length, (i + 1) * cell_length) and times
/// [j * cell_duration, (j + 1) * cell_duration).
class HeatmapGrid {
public:
    HeatmapGrid() = default;
    HeatmapGrid(std::size_t space_cells, std::size_t time_cells, double cell_length = 50.0,
                double cell_duration = 10.0);

    std::size_t space_cells() const noexcept { return space_cells_; }
    std::size_t time_cells() const noexcept { return time_cells_; }
    double cell_length() const noexcept { return cell_length_; }
    double cell_duration() const noexcept { return cell_duration_; }

    /// nullopt for cells without samples.
    std::optional<double> at(std::size_t space, std::size_t time) const;
    std::size_t samples(std::size_t space, std::size_t time) const;
    void set(std::size_t space, std::size_t time, double value, std::size_t samples);
    std::size_t total_samples() const;

    /// Rows are space cells (upstream first), columns time cells. Missing
    /// cells are written as empty fields.
    void write_csv(std::ostream& out) const;

private:
    std::size_t index(std::size_t space, std::size_t time) const;

    std::size_t space_cells_ = 0;
    std::size_t time_cells_ = 0;
    double cell_length_ = 50.0;
    double cell_duration_ = 10.0;
    std::vector<double> values_;
    std::vector<std::size_t> counts_;
};

struct SpeedGrids {
    HeatmapGrid mean;
    HeatmapGrid stddev; // population standard deviation
};

/// Bins each (time, position, speed) sample into its 50 m x 10 s cell.
/// Throws std::invalid_argument for samples outside [0, corridor_length).
SpeedGrids accumulate_grids(std::span<const TrajectoryRow> log, double corridor_length,
                            double cell_length = 50.0, double cell_duration = 10.0);

/// Non-missing cells whose value is below `threshold_kmh`.
int count_cells_below(const HeatmapGrid& grid, double threshold_kmh);

struct EpisodeMetrics {
    std::string scenario;
    std::string controller; // "rule-based" or "learned"
    int episode = 0;
    std::uint64_t seed = 0;
    double episode_reward = 0.0;
    int throughput = 0;     // vehicles exited
    int episode_length = 0; // decision steps (seconds)
    int cells_below_8kmh = 0;
    SpeedGrids grids;
};

std::vector<int> episode_throughput(std::span<const EpisodeMetrics> metrics);

enum class ColorRamp { speed, deviation };

/// SVG heatmap, time on the x axis and position on the y axis (upstream at
/// the bottom). Speed ramp: red (0) -> yellow -> green (vmax_kmh). Deviation
/// ramp: green (0) -> yellow -> red (vmax_kmh). Missing cells are grey.
void write_heatmap_svg(std::ostream& out, const HeatmapGrid& grid, ColorRamp ramp, double vmax_kmh,
                       const std::string& title);

} // namespace lanedrop
