// SPDX-License-Identifier: Apache-2.0
#include "kie/graph_builder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <json.hpp>

namespace kie {

double VisibilityGraph::distance(int i, int j) const {
    return std::hypot(centers[i].x - centers[j].x, centers[i].y - centers[j].y);
}

bool VisibilityGraph::adjacent(int i, int j) const {
    const auto& row = adjacency[i];
    return std::binary_search(row.begin(), row.end(), j);
}

double ray_box_entry(Point origin, double dx, double dy, const BBox& box, double max_length) {
    double t_near = -std::numeric_limits<double>::infinity();
    double t_far = std::numeric_limits<double>::infinity();

    auto slab = [&](double o, double d, double lo, double hi) {
        if (d == 0.0) return o >= lo && o <= hi;
        double t0 = (lo - o) / d;
        double t1 = (hi - o) / d;
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
        return true;
    };
    if (!slab(origin.x, dx, box.x1, box.x2)) return -1.0;
    if (!slab(origin.y, dy, box.y1, box.y2)) return -1.0;
    if (t_near > t_far || t_far < 0.0) return -1.0;
    const double entry = std::max(t_near, 0.0);
    return entry <= max_length ? entry : -1.0;
}

VisibilityGraph build_visibility_graph(const Document& doc) {
    VisibilityGraph vg;
    const int n = static_cast<int>(doc.fields.size());
    vg.centers.reserve(n);
    for (const auto& f : doc.fields) vg.centers.push_back({f.box.cx(), f.box.cy()});
    vg.adjacency.assign(n, {});

    const double diagonal = std::numbers::sqrt2;
    for (int i = 0; i < n; ++i) {
        for (int r = 0; r < kVisibilityRays; ++r) {
            const double angle = 2.0 * std::numbers::pi * r / kVisibilityRays;
            const double dx = std::cos(angle);
            const double dy = std::sin(angle);
            int best = -1;
            double best_t = std::numeric_limits<double>::infinity();
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                const double t = ray_box_entry(vg.centers[i], dx, dy, doc.fields[j].box, diagonal);
                if (t >= 0.0 && t < best_t) {
                    best_t = t;
                    best = j;
                }
            }
            if (best >= 0) {
                vg.adjacency[i].push_back(best);
                vg.adjacency[best].push_back(i);
            }
        }
    }
    for (auto& row : vg.adjacency) {
        std::sort(row.begin(), row.end());
        row.erase(std::unique(row.begin(), row.end()), row.end());
    }
    return vg;
}

std::vector<Edge> prim_mst(const VisibilityGraph& vg) {
    const int n = vg.size();
    std::vector<Edge> tree;
    if (n < 2) return tree;

    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<int> component(n, -1);
    std::vector<bool> in_tree(n, false);
    std::vector<double> key(n, kInf);
    std::vector<int> parent(n, -1);
    std::vector<std::pair<int, int>> undirected;

    int n_components = 0;
    for (int root = 0; root < n; ++root) {
        if (in_tree[root]) continue;
        const int comp = n_components++;
        key[root] = 0.0;
        // O(V^2) Prim restricted to the component reachable from root.
        while (true) {
            int u = -1;
            for (int v = 0; v < n; ++v) {
                if (!in_tree[v] && key[v] < kInf && (u < 0 || key[v] < key[u])) u = v;
            }
            if (u < 0) break;
            in_tree[u] = true;
            component[u] = comp;
            if (parent[u] >= 0) undirected.emplace_back(parent[u], u);
            for (int v : vg.adjacency[u]) {
                const double w = vg.distance(u, v);
                if (!in_tree[v] && w < key[v]) {
                    key[v] = w;
                    parent[v] = u;
                }
            }
        }
    }

    // Join components with the globally shortest cross pair each round.
    while (n_components > 1) {
        int best_u = -1, best_v = -1;
        double best_w = kInf;
        for (int u = 0; u < n; ++u) {
            for (int v = u + 1; v < n; ++v) {
                if (component[u] == component[v]) continue;
                const double w = vg.distance(u, v);
                if (w < best_w) {
                    best_w = w;
                    best_u = u;
                    best_v = v;
                }
            }
        }
        undirected.emplace_back(best_u, best_v);
        const int keep = component[best_u];
        const int drop = component[best_v];
        for (int& c : component) {
            if (c == drop) c = keep;
        }
        --n_components;
    }

    tree.reserve(undirected.size() * 2);
    for (auto [u, v] : undirected) {
        tree.push_back({u, v});
        tree.push_back({v, u});
    }
    return tree;
}

double tree_weight(const VisibilityGraph& vg, const std::vector<Edge>& directed_edges) {
    double total = 0.0;
    for (const auto& e : directed_edges) {
        if (e.from < e.to) total += vg.distance(e.from, e.to);
    }
    return total;
}

FieldGraph extract_features(const Document& doc, const std::vector<Edge>& skeleton,
                            const TextEmbedder& embedder) {
    FieldGraph g;
    g.n_fields = static_cast<int>(doc.fields.size());
    g.n_landmarks = static_cast<int>(doc.landmarks.size());
    g.edges = skeleton;

    const int n = g.n_fields;
    const int L = g.n_landmarks;
    g.vertex_spatial.resize(static_cast<Eigen::Index>(n) * L, 2);
    g.vertex_aspect.resize(n, 2);
    g.vertex_text.resize(n, kEmbeddingDim);
    for (int i = 0; i < n; ++i) {
        const auto& fb = doc.fields[i].box;
        for (int k = 0; k < L; ++k) {
            const auto& lb = doc.landmarks[k].box;
            g.vertex_spatial(i * L + k, 0) = lb.cx() - fb.cx();
            g.vertex_spatial(i * L + k, 1) = lb.cy() - fb.cy();
        }
        g.vertex_aspect(i, 0) = fb.width();
        g.vertex_aspect(i, 1) = fb.height();
        g.vertex_text.row(i) = embedder.embed(doc.fields[i].text).transpose();
    }

    const auto m = static_cast<Eigen::Index>(skeleton.size());
    g.edge_direction.resize(m, 2);
    g.edge_aspect.resize(m, 4);
    for (Eigen::Index e = 0; e < m; ++e) {
        const auto& from = doc.fields[skeleton[e].from].box;
        const auto& to = doc.fields[skeleton[e].to].box;
        g.edge_direction(e, 0) = to.cx() - from.cx();
        g.edge_direction(e, 1) = to.cy() - from.cy();
        g.edge_aspect(e, 0) = from.width();
        g.edge_aspect(e, 1) = from.height();
        g.edge_aspect(e, 2) = to.width();
        g.edge_aspect(e, 3) = to.height();
    }
    return g;
}

FieldGraph build_field_graph(const Document& doc, const TextEmbedder& embedder) {
    return extract_features(doc, prim_mst(build_visibility_graph(doc)), embedder);
}

std::string mst_to_json(const Document& doc, const FieldGraph& graph) {
    nlohmann::ordered_json j;
    j["doc_id"] = doc.doc_id;
    j["nodes"] = nlohmann::ordered_json::array();
    for (const auto& f : doc.fields) {
        j["nodes"].push_back({{"id", f.id}, {"center", {f.box.cx(), f.box.cy()}}});
    }
    j["edges"] = nlohmann::ordered_json::array();
    for (const auto& e : graph.edges) {
        if (e.from < e.to) j["edges"].push_back({doc.fields[e.from].id, doc.fields[e.to].id});
    }
    return j.dump(2) + "\n";
}

}  // namespace kie
