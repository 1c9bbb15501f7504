#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "quarry/annotations.hpp"
#include "quarry/snapshot.hpp"

namespace quarry {

/// Axial hex coordinate, pointy-top orientation.
struct HexCoord {
    int q = 0;
    int r = 0;

    bool operator==(const HexCoord&) const = default;
    auto operator<=>(const HexCoord&) const = default;
};

/// The six axial neighbour offsets, counter-clockwise from east.
inline constexpr HexCoord kHexDirections[6] = {{1, 0}, {0, 1}, {-1, 1}, {-1, 0}, {0, -1}, {1, -1}};

bool hex_adjacent(HexCoord a, HexCoord b) noexcept;

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Centre of a unit-circumradius pointy-top hexagon.
Point hex_center(HexCoord h) noexcept;

using Polygon = std::vector<Point>;

inline constexpr unsigned kMaxGosperOrder = 8;

/// First 7^order cells of the flowsnake walk. Throws Error{OrderTooLarge}
/// beyond kMaxGosperOrder.
std::vector<HexCoord> gosper_curve(unsigned order);

/// Smallest k with 7^k >= n (0 for n <= 1).
unsigned gosper_order_for(std::size_t n) noexcept;

struct GosperLayout {
    std::uint64_t snapshot_id = 0;
    unsigned order = 0;
    std::vector<HexCoord> cells;
    std::vector<std::string> doc_order;  // document in cell i
    std::unordered_map<std::string, std::size_t> doc_cells;
    /// clusters[l][i]: level-l document cluster of the document in cell i.
    std::vector<std::vector<BlockId>> clusters;

    std::size_t levels() const noexcept { return clusters.size(); }
};

/// Places the snapshot's documents on consecutive curve cells in
/// depth-first order of the document-cluster hierarchy: larger clusters
/// first, then lower ids; documents inside a level-0 cluster by id.
GosperLayout layout_documents(const ModelSnapshot& snapshot);

/// Outline polygons of every cluster's cells at `level`, in plane
/// coordinates. Throws Error{InvalidLevel}.
std::map<BlockId, std::vector<Polygon>> region_boundaries(const GosperLayout& layout, std::size_t level);

/// Number of hex sides at `level` that face a cell of another cluster or an
/// unassigned cell.
std::size_t boundary_edge_count(const GosperLayout& layout, std::size_t level);

struct PinFilter {
    enum class Mode { All, None, Codes } mode = Mode::All;
    std::set<std::string> codes;

    static PinFilter all() { return {}; }
    static PinFilter none() { return {Mode::None, {}}; }
    static PinFilter only(std::set<std::string> codes) { return {Mode::Codes, std::move(codes)}; }
};

struct Pin {
    std::string doc_id;
    std::size_t cell = 0;
    HexCoord coord;
    /// Distinct colour indexes of the passing codes' categories; -1 stands
    /// for codes without a category.
    std::vector<int> color_indexes;
    std::size_t unique_category_count = 0;
    std::vector<std::string> code_ids;
};

/// Throws Error{NotFound} when the filter names an unknown code.
std::vector<Pin> pin_overlay(const GosperLayout& layout, const AnnotationSet& annotations, const PinFilter& filter);

/// {order, hexes, boundaries, pins} for the map endpoint.
nlohmann::json map_payload(const GosperLayout& layout, std::optional<std::size_t> level,
                           const std::vector<Pin>& pins);

}  // namespace quarry
