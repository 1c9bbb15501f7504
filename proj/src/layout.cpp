#include "quarry/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

#include "quarry/error.hpp"

namespace quarry {

bool hex_adjacent(HexCoord a, HexCoord b) noexcept {
    for (const auto& d : kHexDirections) {
        if (a.q + d.q == b.q && a.r + d.r == b.r) return true;
    }
    return false;
}

Point hex_center(HexCoord h) noexcept {
    return {std::sqrt(3.0) * (h.q + h.r / 2.0), 1.5 * h.r};
}

// --- Curve ------------------------------------------------------------------------

namespace {

constexpr std::string_view kRuleA = "A-B--B+A++AA+B-";
constexpr std::string_view kRuleB = "+A-BB--B-A++A+B";

struct Turtle {
    HexCoord pos;
    int dir = 0;
    std::size_t limit = 0;
    std::vector<HexCoord>* out = nullptr;

    void draw(char symbol, unsigned depth) {
        if (out->size() >= limit) return;
        if (depth == 0) {
            pos.q += kHexDirections[dir].q;
            pos.r += kHexDirections[dir].r;
            out->push_back(pos);
            return;
        }
        for (char c : symbol == 'A' ? kRuleA : kRuleB) {
            if (c == '+') {
                dir = (dir + 1) % 6;
            } else if (c == '-') {
                dir = (dir + 5) % 6;
            } else {
                draw(c, depth - 1);
            }
        }
    }
};

}  // namespace

std::vector<HexCoord> gosper_curve(unsigned order) {
    if (order > kMaxGosperOrder) {
        throw Error(ErrorCode::OrderTooLarge, "curve order " + std::to_string(order) + " exceeds " +
                                                  std::to_string(kMaxGosperOrder));
    }
    std::size_t cells = 1;
    for (unsigned k = 0; k < order; ++k) cells *= 7;
    std::vector<HexCoord> out;
    out.reserve(cells + 1);
    out.push_back({0, 0});
    Turtle t{{0, 0}, 0, cells, &out};
    t.draw('A', order);
    out.resize(cells);
    return out;
}

unsigned gosper_order_for(std::size_t n) noexcept {
    unsigned k = 0;
    std::size_t cap = 1;
    while (cap < n) {
        cap *= 7;
        ++k;
    }
    return k;
}

// --- Document placement -------------------------------------------------------------

GosperLayout layout_documents(const ModelSnapshot& snapshot) {
    GosperLayout layout;
    layout.snapshot_id = snapshot.snapshot_id;
    const std::size_t n = snapshot.docs.size();
    const std::size_t h = snapshot.height();
    const std::size_t first = snapshot.words.size();

    std::vector<std::vector<BlockId>> doc_levels(h, std::vector<BlockId>(n));
    for (std::size_t l = 0; l < h; ++l) {
        const auto c = snapshot.composed(l);
        for (std::size_t i = 0; i < n; ++i) doc_levels[l][i] = c[first + i];
    }

    std::vector<std::size_t> order;
    order.reserve(n);
    if (n > 0) {
        std::vector<std::map<BlockId, std::size_t>> sizes(h);
        std::vector<std::map<BlockId, std::set<BlockId>>> children(h);
        std::map<BlockId, std::vector<std::size_t>> leaves;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t l = 0; l < h; ++l) {
                ++sizes[l][doc_levels[l][i]];
                if (l > 0) children[l][doc_levels[l][i]].insert(doc_levels[l - 1][i]);
            }
            leaves[doc_levels[0][i]].push_back(i);
        }
        auto sorted = [&](std::size_t l, const auto& ids) {
            std::vector<BlockId> v(ids.begin(), ids.end());
            std::sort(v.begin(), v.end(), [&](BlockId a, BlockId b) {
                const auto sa = sizes[l].at(a), sb = sizes[l].at(b);
                return sa != sb ? sa > sb : a < b;
            });
            return v;
        };
        auto visit = [&](auto&& self, std::size_t l, BlockId c) -> void {
            if (l == 0) {
                auto docs = leaves[c];
                std::sort(docs.begin(), docs.end(),
                          [&](std::size_t a, std::size_t b) { return snapshot.docs[a] < snapshot.docs[b]; });
                order.insert(order.end(), docs.begin(), docs.end());
                return;
            }
            for (BlockId child : sorted(l - 1, children[l][c])) self(self, l - 1, child);
        };
        std::set<BlockId> tops;
        for (auto& [c, count] : sizes[h - 1]) tops.insert(c);
        for (BlockId top : sorted(h - 1, tops)) visit(visit, h - 1, top);
    }

    layout.order = gosper_order_for(n);
    layout.cells = gosper_curve(layout.order);
    layout.clusters.assign(h, {});
    for (std::size_t cell = 0; cell < order.size(); ++cell) {
        const std::size_t i = order[cell];
        layout.doc_order.push_back(snapshot.docs[i]);
        layout.doc_cells.emplace(snapshot.docs[i], cell);
        for (std::size_t l = 0; l < h; ++l) layout.clusters[l].push_back(doc_levels[l][i]);
    }
    return layout;
}

// --- Boundaries -----------------------------------------------------------------------

namespace {

// Hex geometry in integer units of (sqrt(3)/2, 1/2): centre (2q + r, 3r),
// corners counter-clockwise from 30 degrees.
constexpr int kCornerX[6] = {1, 0, -1, -1, 0, 1};
constexpr int kCornerY[6] = {1, 2, 1, -1, -2, -1};

struct IPoint {
    int x;
    int y;
    auto operator<=>(const IPoint&) const = default;
};

IPoint corner(HexCoord h, int i) { return {2 * h.q + h.r + kCornerX[i], 3 * h.r + kCornerY[i]}; }

struct DirectedEdge {
    IPoint from;
    IPoint to;
};

/// Boundary sides per cluster, each running counter-clockwise around its cell.
std::map<BlockId, std::vector<DirectedEdge>> boundary_sides(const GosperLayout& layout, std::size_t level) {
    if (level >= layout.levels()) {
        throw Error(ErrorCode::InvalidLevel, "level " + std::to_string(level) + " out of range");
    }
    const auto& clusters = layout.clusters[level];
    std::map<HexCoord, BlockId> owner;
    for (std::size_t i = 0; i < clusters.size(); ++i) owner.emplace(layout.cells[i], clusters[i]);
    std::map<BlockId, std::vector<DirectedEdge>> sides;
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        const HexCoord h = layout.cells[i];
        for (int e = 0; e < 6; ++e) {
            const auto& d = kHexDirections[(e + 1) % 6];
            auto it = owner.find({h.q + d.q, h.r + d.r});
            if (it != owner.end() && it->second == clusters[i]) continue;
            sides[clusters[i]].push_back({corner(h, e), corner(h, (e + 1) % 6)});
        }
    }
    return sides;
}

}  // namespace

std::size_t boundary_edge_count(const GosperLayout& layout, std::size_t level) {
    std::size_t count = 0;
    for (const auto& [c, sides] : boundary_sides(layout, level)) count += sides.size();
    return count;
}

std::map<BlockId, std::vector<Polygon>> region_boundaries(const GosperLayout& layout, std::size_t level) {
    const double sx = std::sqrt(3.0) / 2.0;
    std::map<BlockId, std::vector<Polygon>> out;
    for (const auto& [cluster, sides] : boundary_sides(layout, level)) {
        std::map<IPoint, std::size_t> next;
        for (std::size_t k = 0; k < sides.size(); ++k) next.emplace(sides[k].from, k);
        std::vector<bool> used(sides.size(), false);
        auto& polygons = out[cluster];
        for (std::size_t k = 0; k < sides.size(); ++k) {
            if (used[k]) continue;
            Polygon poly;
            std::size_t cur = k;
            while (!used[cur]) {
                used[cur] = true;
                poly.push_back({sides[cur].from.x * sx, sides[cur].from.y * 0.5});
                cur = next.at(sides[cur].to);
            }
            polygons.push_back(std::move(poly));
        }
    }
    return out;
}

// --- Pins ---------------------------------------------------------------------------------

std::vector<Pin> pin_overlay(const GosperLayout& layout, const AnnotationSet& annotations, const PinFilter& filter) {
    if (filter.mode == PinFilter::Mode::Codes) {
        for (const auto& id : filter.codes) {
            if (annotations.find_code(id) == nullptr) throw Error(ErrorCode::NotFound, "unknown code '" + id + "'");
        }
    }
    std::vector<Pin> pins;
    if (filter.mode == PinFilter::Mode::None) return pins;
    for (std::size_t cell = 0; cell < layout.doc_order.size(); ++cell) {
        const auto& doc_id = layout.doc_order[cell];
        std::set<std::string> codes;
        for (const Highlight* h : annotations.highlights_for_document(doc_id)) {
            if (filter.mode == PinFilter::Mode::All || filter.codes.count(h->code_id)) codes.insert(h->code_id);
        }
        if (codes.empty()) continue;
        std::set<int> colors;
        for (const auto& id : codes) {
            const Code* code = annotations.find_code(id);
            const Category* cat = code && code->category_id ? annotations.find_category(*code->category_id) : nullptr;
            colors.insert(cat ? cat->color_index : -1);
        }
        Pin pin;
        pin.doc_id = doc_id;
        pin.cell = cell;
        pin.coord = layout.cells[cell];
        pin.color_indexes.assign(colors.begin(), colors.end());
        pin.unique_category_count = colors.size();
        pin.code_ids.assign(codes.begin(), codes.end());
        pins.push_back(std::move(pin));
    }
    return pins;
}

nlohmann::json map_payload(const GosperLayout& layout, std::optional<std::size_t> level,
                           const std::vector<Pin>& pins) {
    nlohmann::json hexes = nlohmann::json::array();
    for (std::size_t i = 0; i < layout.doc_order.size(); ++i) {
        hexes.push_back({{"doc_id", layout.doc_order[i]}, {"q", layout.cells[i].q}, {"r", layout.cells[i].r}});
    }
    nlohmann::json boundaries = nlohmann::json::object();
    for (std::size_t l = 0; l < layout.levels(); ++l) {
        if (level && *level != l) continue;
        nlohmann::json per_cluster = nlohmann::json::object();
        for (const auto& [cluster, polygons] : region_boundaries(layout, l)) {
            nlohmann::json polys = nlohmann::json::array();
            for (const auto& poly : polygons) {
                nlohmann::json pts = nlohmann::json::array();
                for (const auto& p : poly) pts.push_back({p.x, p.y});
                polys.push_back(std::move(pts));
            }
            per_cluster[std::to_string(cluster)] = std::move(polys);
        }
        boundaries[std::to_string(l)] = std::move(per_cluster);
    }
    nlohmann::json pin_list = nlohmann::json::array();
    for (const auto& pin : pins) {
        pin_list.push_back({{"doc_id", pin.doc_id},
                            {"cell", pin.cell},
                            {"q", pin.coord.q},
                            {"r", pin.coord.r},
                            {"color_indexes", pin.color_indexes},
                            {"unique_category_count", pin.unique_category_count},
                            {"code_ids", pin.code_ids}});
    }
    return {{"snapshot_id", layout.snapshot_id},
            {"order", layout.order},
            {"levels", layout.levels()},
            {"hexes", hexes},
            {"boundaries", boundaries},
            {"pins", pin_list}};
}

}  // namespace quarry
