// SPDX-License-Identifier: Apache-2.0
#include "kie/solver.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "kie/rng.hpp"

namespace kie {

namespace {

constexpr double kEps = 1e-12;
constexpr int kHeuristicKicks = 32;

/// Index structures shared by every solver.
class Problem {
public:
    explicit Problem(const AffinityMatrix& a) : a_(a), nq_(a.rows()), ns_(a.cols()) {
        const auto n_qe = static_cast<Eigen::Index>(a.query_edges.size());
        const auto n_se = static_cast<Eigen::Index>(a.support_edges.size());
        if (a.edge.size() > 0 && (a.edge.rows() != n_qe || a.edge.cols() != n_se)) {
            throw std::invalid_argument("edge block shape does not match the edge lists");
        }
        incident_.assign(nq_, {});
        if (a.edge.size() == 0) return;
        support_index_.assign(static_cast<std::size_t>(ns_) * ns_, -1);
        for (int f = 0; f < n_se; ++f) {
            const auto& e = a.support_edges[f];
            if (e.from < 0 || e.from >= ns_ || e.to < 0 || e.to >= ns_) {
                throw std::invalid_argument("support edge endpoint out of range");
            }
            support_index_[static_cast<std::size_t>(e.from) * ns_ + e.to] = f;
        }
        for (int e = 0; e < n_qe; ++e) {
            const auto& q = a.query_edges[e];
            if (q.from < 0 || q.from >= nq_ || q.to < 0 || q.to >= nq_) {
                throw std::invalid_argument("query edge endpoint out of range");
            }
            incident_[q.from].push_back(e);
            if (q.to != q.from) incident_[q.to].push_back(e);
        }
    }

    int rows() const { return nq_; }
    int cols() const { return ns_; }
    bool has_edges() const { return a_.edge.size() > 0; }
    double vertex(int i, int c) const { return a_.vertex(i, c); }
    const Edge& query_edge(int e) const { return a_.query_edges[e]; }
    int n_query_edges() const { return has_edges() ? static_cast<int>(a_.query_edges.size()) : 0; }
    const std::vector<int>& incident(int row) const { return incident_[row]; }

    /// Score of query edge e when its endpoints sit on columns (ca, cb).
    double edge_term(int e, int ca, int cb) const {
        if (ca < 0 || cb < 0) return 0.0;
        const int f = support_index_[static_cast<std::size_t>(ca) * ns_ + cb];
        return f < 0 ? 0.0 : a_.edge(e, f);
    }

    int n_support_edges() const { return has_edges() ? static_cast<int>(a_.support_edges.size()) : 0; }
    const Edge& support_edge(int f) const { return a_.support_edges[f]; }
    double edge_score(int e, int f) const { return a_.edge(e, f); }

    double objective(const std::vector<int>& cols) const {
        double total = 0.0;
        for (int i = 0; i < nq_; ++i) {
            if (cols[i] >= 0) total += a_.vertex(i, cols[i]);
        }
        for (int e = 0; e < n_query_edges(); ++e) {
            const auto& q = a_.query_edges[e];
            total += edge_term(e, cols[q.from], cols[q.to]);
        }
        return total;
    }

private:
    const AffinityMatrix& a_;
    int nq_, ns_;
    std::vector<int> support_index_;
    std::vector<std::vector<int>> incident_;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Minimum-cost assignment for n <= m (rows to distinct columns).
std::vector<int> hungarian_min(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const int m = static_cast<int>(cost.cols());
    constexpr double kInf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<bool> used(m + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), kInf);
        std::fill(used.begin(), used.end(), false);
        do {
            used[j0] = true;
            const int i0 = p[j0];
            double delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<int> col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) col[p[j] - 1] = j - 1;
    }
    return col;
}

class BranchAndBound {
public:
    BranchAndBound(const Problem& p, std::int64_t max_nodes) : p_(p), max_nodes_(max_nodes) {
        const int nq = p.rows();
        order_.reserve(nq);
        pos_.assign(nq, -1);
        // BFS over the query edge skeleton so tree neighbours are decided close together.
        std::vector<std::vector<int>> adj(nq);
        for (int e = 0; e < p.n_query_edges(); ++e) {
            const auto& q = p.query_edge(e);
            adj[q.from].push_back(q.to);
            adj[q.to].push_back(q.from);
        }
        for (auto& row : adj) {
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
        }
        for (int root = 0; root < nq; ++root) {
            if (pos_[root] >= 0) continue;
            std::vector<int> queue{root};
            pos_[root] = static_cast<int>(order_.size());
            order_.push_back(root);
            for (std::size_t h = 0; h < queue.size(); ++h) {
                for (int nb : adj[queue[h]]) {
                    if (pos_[nb] >= 0) continue;
                    pos_[nb] = static_cast<int>(order_.size());
                    order_.push_back(nb);
                    queue.push_back(nb);
                }
            }
        }
        // Each edge is credited to whichever endpoint is decided later. Its
        // optimistic value depends on the column that endpoint takes.
        links_.assign(nq, {});
        const int ns = p.cols();
        optimistic_.assign(static_cast<std::size_t>(p.n_query_edges()) * ns, 0.0);
        for (int e = 0; e < p.n_query_edges(); ++e) {
            const auto& q = p.query_edge(e);
            const int later = pos_[q.from] > pos_[q.to] ? q.from : q.to;
            links_[later].push_back(e);
            for (int f = 0; f < p.n_support_edges(); ++f) {
                const auto& se = p.support_edge(f);
                const int c = later == q.from ? se.from : se.to;
                double& slot = optimistic_[static_cast<std::size_t>(e) * ns + c];
                slot = std::max(slot, p.edge_score(e, f));
            }
        }
        cols_.assign(nq, kUndecided);
        used_.assign(p.cols(), false);
    }

    void seed_incumbent(const std::vector<int>& cols, double value) {
        best_cols_ = cols;
        best_value_ = value;
    }

    double bound_from(int depth) const {
        double total = 0.0;
        for (int d = depth; d < p_.rows(); ++d) {
            const int r = order_[d];
            double best = 0.0;
            for (int c = 0; c < p_.cols(); ++c) {
                if (used_[c]) continue;
                best = std::max(best, p_.vertex(r, c) + link_bound(r, c));
            }
            total += best;
        }
        return total;
    }

    void run() { dfs(0, 0.0); }

    bool aborted() const { return aborted_; }
    std::int64_t nodes() const { return nodes_; }
    const std::vector<int>& best_cols() const { return best_cols_; }
    double best_value() const { return best_value_; }

private:
    static constexpr int kUndecided = -2;

    int other_end(int e, int r) const {
        const auto& q = p_.query_edge(e);
        return q.from == r ? q.to : q.from;
    }

    /// Edge gain of putting row r on column c, counting only links whose
    /// other endpoint is already decided.
    double decided_link_gain(int r, int c) const {
        double g = 0.0;
        for (int e : links_[r]) {
            const auto& q = p_.query_edge(e);
            const int oc = cols_[other_end(e, r)];
            if (oc < 0) continue;
            g += q.from == r ? p_.edge_term(e, c, oc) : p_.edge_term(e, oc, c);
        }
        return g;
    }

    /// Exact gain of links to decided rows plus the optimistic value of
    /// links to undecided ones, for row r on column c.
    double link_bound(int r, int c) const {
        const int ns = p_.cols();
        double g = 0.0;
        for (int e : links_[r]) {
            const auto& q = p_.query_edge(e);
            const int oc = cols_[other_end(e, r)];
            if (oc == kUndecided) {
                g += optimistic_[static_cast<std::size_t>(e) * ns + c];
            } else if (oc >= 0) {
                g += q.from == r ? p_.edge_term(e, c, oc) : p_.edge_term(e, oc, c);
            }
        }
        return g;
    }

    void dfs(int depth, double value) {
        if (++nodes_ > max_nodes_) {
            aborted_ = true;
            return;
        }
        if (depth == p_.rows()) {
            if (value > best_value_ + kEps) {
                best_value_ = value;
                best_cols_ = cols_;
            }
            return;
        }
        const int r = order_[depth];
        std::vector<std::pair<double, int>> candidates;
        candidates.reserve(p_.cols() + 1);
        candidates.emplace_back(0.0, kUnmatched);
        for (int c = 0; c < p_.cols(); ++c) {
            if (!used_[c]) candidates.emplace_back(p_.vertex(r, c) + decided_link_gain(r, c), c);
        }
        std::stable_sort(candidates.begin(), candidates.end(),
                         [](const auto& x, const auto& y) { return x.first > y.first; });

        for (const auto& [gain, c] : candidates) {
            cols_[r] = c;
            if (c >= 0) used_[c] = true;
            const double bound = value + gain + bound_from(depth + 1);
            if (bound > best_value_ + kEps) dfs(depth + 1, value + gain);
            if (c >= 0) used_[c] = false;
            cols_[r] = kUndecided;
            if (aborted_) return;
        }
    }

    const Problem& p_;
    std::int64_t max_nodes_;
    std::vector<int> order_, pos_;
    std::vector<std::vector<int>> links_;
    std::vector<double> optimistic_;
    std::vector<int> cols_;
    std::vector<bool> used_;
    std::vector<int> best_cols_;
    double best_value_ = -std::numeric_limits<double>::infinity();
    std::int64_t nodes_ = 0;
    bool aborted_ = false;
};

/// Local search state with incremental move evaluation.
class LocalSearch {
public:
    LocalSearch(const Problem& p, std::vector<int> cols) : p_(p), cols_(std::move(cols)) {
        owner_.assign(p.cols(), -1);
        for (int i = 0; i < p.rows(); ++i) {
            if (cols_[i] >= 0) owner_[cols_[i]] = i;
        }
    }

    /// Runs passes until none improves. Returns the number of passes.
    std::int64_t run(std::uint64_t seed) {
        Rng rng(seed);
        std::vector<int> rows(p_.rows());
        std::iota(rows.begin(), rows.end(), 0);
        std::int64_t passes = 0;
        bool improved = true;
        while (improved && passes < kMaxPasses) {
            improved = false;
            ++passes;
            rng.shuffle(std::span<int>(rows));
            for (int r : rows) {
                for (int c = 0; c < p_.cols(); ++c) {
                    if (owner_[c] < 0 && try_move(r, c, -1, 0)) improved = true;
                }
                if (cols_[r] >= 0 && try_move(r, kUnmatched, -1, 0)) improved = true;
                for (int s = 0; s < p_.rows(); ++s) {
                    if (s == r || (cols_[r] < 0 && cols_[s] < 0)) continue;
                    if (try_move(r, cols_[s], s, cols_[r])) improved = true;
                }
            }
        }
        return passes;
    }

    const std::vector<int>& cols() const { return cols_; }

private:
    static constexpr std::int64_t kMaxPasses = 10'000;

    /// Vertex terms of r (and s) plus every edge touching them, counted once.
    double local_value(int r, int s) const {
        double v = 0.0;
        if (cols_[r] >= 0) v += p_.vertex(r, cols_[r]);
        if (s >= 0 && cols_[s] >= 0) v += p_.vertex(s, cols_[s]);
        for (int e : p_.incident(r)) {
            const auto& q = p_.query_edge(e);
            v += p_.edge_term(e, cols_[q.from], cols_[q.to]);
        }
        if (s >= 0) {
            for (int e : p_.incident(s)) {
                const auto& q = p_.query_edge(e);
                if (q.from == r || q.to == r) continue;
                v += p_.edge_term(e, cols_[q.from], cols_[q.to]);
            }
        }
        return v;
    }

    void assign(int r, int c) {
        if (cols_[r] >= 0 && owner_[cols_[r]] == r) owner_[cols_[r]] = -1;
        cols_[r] = c;
        if (c >= 0) owner_[c] = r;
    }

    /// Sets r -> rc and, when s >= 0, s -> sc; keeps the change iff it is a strict improvement.
    bool try_move(int r, int rc, int s, int sc) {
        const int old_r = cols_[r];
        const int old_s = s >= 0 ? cols_[s] : kUnmatched;
        const double before = local_value(r, s);
        set_pair(r, rc, s, sc);
        const double after = local_value(r, s);
        if (after > before + kEps) return true;
        set_pair(r, old_r, s, old_s);
        return false;
    }

    void set_pair(int r, int rc, int s, int sc) {
        if (s < 0) {
            assign(r, rc);
            return;
        }
        // Clear both before re-owning so a column exchange stays consistent.
        if (cols_[r] >= 0) owner_[cols_[r]] = -1;
        if (cols_[s] >= 0) owner_[cols_[s]] = -1;
        cols_[r] = rc;
        cols_[s] = sc;
        if (rc >= 0) owner_[rc] = r;
        if (sc >= 0) owner_[sc] = s;
    }

    const Problem& p_;
    std::vector<int> cols_;
    std::vector<int> owner_;
};

void check_shapes(const PartialAssignment& p, const AffinityMatrix& a) {
    if (p.rows() != a.rows() || p.cols() != a.cols()) {
        throw std::invalid_argument("assignment shape " + std::to_string(p.rows()) + "x" + std::to_string(p.cols()) +
                                    " does not match affinity " + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()));
    }
}

}  // namespace

double objective_value(const PartialAssignment& p, const AffinityMatrix& a) {
    check_shapes(p, a);
    return Problem(a).objective(p.col_of_row());
}

PartialAssignment solve_vertex_lap(const Eigen::MatrixXd& vertex) {
    const int nq = static_cast<int>(vertex.rows());
    const int ns = static_cast<int>(vertex.cols());
    PartialAssignment out(nq, ns);
    if (nq == 0 || ns == 0) return out;
    // A pair worth <= 0 never beats leaving the row unmatched, so clamping
    // at zero and dropping non-positive pairs afterwards is exact.
    const Eigen::MatrixXd gain = vertex.cwiseMax(0.0);
    if (nq <= ns) {
        const auto col = hungarian_min(-gain);
        for (int i = 0; i < nq; ++i) {
            if (col[i] >= 0 && vertex(i, col[i]) > 0.0) out.set(i, col[i]);
        }
    } else {
        const Eigen::MatrixXd transposed = -gain.transpose();
        const auto row = hungarian_min(transposed);
        for (int a = 0; a < ns; ++a) {
            if (row[a] >= 0 && vertex(row[a], a) > 0.0) out.set(row[a], a);
        }
    }
    return out;
}

SolveReport solve_bruteforce(const AffinityMatrix& a) {
    const auto t0 = Clock::now();
    const Problem p(a);
    const int nq = p.rows(), ns = p.cols();
    if (nq > kBruteforceMaxSide || ns > kBruteforceMaxSide) {
        throw SolverLimitError("bruteforce is limited to 7x7 instances");
    }
    std::vector<int> cols(nq, kUnmatched), best(nq, kUnmatched);
    std::vector<bool> used(ns, false);
    double best_value = -std::numeric_limits<double>::infinity();
    std::int64_t leaves = 0;

    // Rows are filled in order and each row tries "unmatched" then columns
    // ascending, so leaves arrive in lexicographic order.
    auto recurse = [&](auto&& self, int row) -> void {
        if (row == nq) {
            ++leaves;
            const double v = p.objective(cols);
            if (v > best_value + kEps) {
                best_value = v;
                best = cols;
            }
            return;
        }
        cols[row] = kUnmatched;
        self(self, row + 1);
        for (int c = 0; c < ns; ++c) {
            if (used[c]) continue;
            used[c] = true;
            cols[row] = c;
            self(self, row + 1);
            used[c] = false;
        }
        cols[row] = kUnmatched;
    };
    recurse(recurse, 0);

    SolveReport rep;
    rep.assignment = PartialAssignment(ns, best);
    rep.objective = p.objective(best);
    rep.exact = true;
    rep.method = "bruteforce";
    rep.nodes_explored = leaves;
    rep.wall_time_s = seconds_since(t0);
    return rep;
}

SolveReport solve_heuristic(const AffinityMatrix& a, std::uint64_t seed) {
    const auto t0 = Clock::now();
    const Problem p(a);
    auto lap = solve_vertex_lap(a.vertex);
    LocalSearch ls(p, lap.col_of_row());
    SolveReport rep;
    rep.iterations = ls.run(seed);
    std::vector<int> best = ls.cols();
    double best_value = p.objective(best);
    if (p.has_edges() && p.cols() > 0) {
        // Iterated local search: kick a few rows of the incumbent and descend again.
        Rng kick(Rng::mix(seed, 0));
        const int n_kicked = std::max(2, p.rows() / 4);
        for (int k = 0; k < kHeuristicKicks; ++k) {
            std::vector<int> cols = best;
            for (int m = 0; m < n_kicked; ++m) {
                const int r = static_cast<int>(kick.below(static_cast<std::uint64_t>(p.rows())));
                const int c = static_cast<int>(kick.below(static_cast<std::uint64_t>(p.cols() + 1))) - 1;
                for (int& other : cols) {
                    if (c >= 0 && other == c) other = kUnmatched;
                }
                cols[r] = c;
            }
            LocalSearch again(p, std::move(cols));
            rep.iterations += again.run(Rng::mix(seed, static_cast<std::uint64_t>(k) + 1));
            const double v = p.objective(again.cols());
            if (v > best_value + kEps) {
                best = again.cols();
                best_value = v;
            }
        }
    }
    rep.assignment = PartialAssignment(p.cols(), best);
    rep.objective = p.objective(best);
    rep.exact = false;
    rep.method = "local_search";
    rep.wall_time_s = seconds_since(t0);
    return rep;
}

double root_upper_bound(const AffinityMatrix& a) {
    const Problem p(a);
    return BranchAndBound(p, 0).bound_from(0);
}

SolveReport solve_exact(const AffinityMatrix& a, const SolverConfig& config) {
    const auto t0 = Clock::now();
    const Problem p(a);
    if (p.rows() > config.exact_threshold) {
        throw SolverLimitError("instance has " + std::to_string(p.rows()) + " query rows, exact threshold is " +
                               std::to_string(config.exact_threshold));
    }
    SolveReport rep;
    if (!p.has_edges()) {
        rep.assignment = solve_vertex_lap(a.vertex);
        rep.objective = p.objective(rep.assignment.col_of_row());
        rep.exact = true;
        rep.method = "lap";
        rep.wall_time_s = seconds_since(t0);
        return rep;
    }

    auto incumbent = solve_heuristic(a, config.seed);
    BranchAndBound bb(p, config.max_nodes);
    bb.seed_incumbent(incumbent.assignment.col_of_row(), incumbent.objective);
    bb.run();

    rep.assignment = PartialAssignment(p.cols(), bb.best_cols());
    rep.objective = p.objective(bb.best_cols());
    rep.exact = !bb.aborted();
    rep.method = "branch_and_bound";
    rep.nodes_explored = bb.nodes();
    rep.iterations = incumbent.iterations;
    rep.wall_time_s = seconds_since(t0);
    return rep;
}

SolveReport solve(const AffinityMatrix& a, const SolverConfig& config) {
    if (a.rows() <= config.exact_threshold) return solve_exact(a, config);
    return solve_heuristic(a, config.seed);
}

std::vector<int> greedy_row_argmax(const Eigen::MatrixXd& vertex) {
    std::vector<int> out(vertex.rows(), kUnmatched);
    if (vertex.cols() == 0) return out;
    for (Eigen::Index i = 0; i < vertex.rows(); ++i) {
        Eigen::Index best = 0;
        vertex.row(i).maxCoeff(&best);
        out[i] = static_cast<int>(best);
    }
    return out;
}

AffinityMatrix random_instance(int n_query, int n_support, bool with_edges, std::uint64_t seed) {
    Rng rng(seed);
    AffinityMatrix a;
    a.vertex.resize(n_query, n_support);
    for (Eigen::Index i = 0; i < a.vertex.rows(); ++i) {
        for (Eigen::Index c = 0; c < a.vertex.cols(); ++c) a.vertex(i, c) = rng.uniform(-1.0, 1.0);
    }
    a.edge.resize(0, 0);
    if (!with_edges || n_query < 2 || n_support < 2) return a;
    auto tree = [&](int n) {
        std::vector<Edge> edges;
        for (int v = 1; v < n; ++v) {
            const int parent = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
            edges.push_back({parent, v});
            edges.push_back({v, parent});
        }
        return edges;
    };
    a.query_edges = tree(n_query);
    a.support_edges = tree(n_support);
    a.edge.resize(static_cast<Eigen::Index>(a.query_edges.size()), static_cast<Eigen::Index>(a.support_edges.size()));
    for (Eigen::Index e = 0; e < a.edge.rows(); ++e) {
        for (Eigen::Index f = 0; f < a.edge.cols(); ++f) a.edge(e, f) = rng.uniform(-1.0, 1.0);
    }
    return a;
}

std::string instance_to_json(const AffinityMatrix& a, const PartialAssignment* ground_truth) {
    nlohmann::ordered_json j;
    auto matrix = [](const Eigen::MatrixXd& m) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            std::vector<double> row(m.cols());
            for (Eigen::Index c = 0; c < m.cols(); ++c) row[c] = m(r, c);
            rows.push_back(row);
        }
        return rows;
    };
    auto edges = [](const std::vector<Edge>& es) {
        nlohmann::ordered_json out = nlohmann::ordered_json::array();
        for (const auto& e : es) out.push_back({e.from, e.to});
        return out;
    };
    j["n_query"] = a.rows();
    j["n_support"] = a.cols();
    j["vertex"] = matrix(a.vertex);
    j["query_edges"] = edges(a.query_edges);
    j["support_edges"] = edges(a.support_edges);
    j["edge"] = matrix(a.edge);
    if (ground_truth) {
        nlohmann::ordered_json gt = nlohmann::ordered_json::array();
        for (int c : ground_truth->col_of_row()) gt.push_back(c >= 0 ? nlohmann::ordered_json(c) : nullptr);
        j["ground_truth"] = gt;
    }
    return j.dump() + "\n";
}

AffinityMatrix instance_from_json(const std::string& text, PartialAssignment* ground_truth) {
    const auto j = nlohmann::json::parse(text);
    AffinityMatrix a;
    const int nq = j.at("n_query").get<int>();
    const int ns = j.at("n_support").get<int>();
    auto matrix = [](const nlohmann::json& rows, Eigen::Index n_rows, Eigen::Index n_cols) {
        Eigen::MatrixXd m(n_rows, n_cols);
        if (static_cast<Eigen::Index>(rows.size()) != n_rows) throw std::invalid_argument("matrix row count mismatch");
        for (Eigen::Index r = 0; r < n_rows; ++r) {
            if (static_cast<Eigen::Index>(rows[r].size()) != n_cols) throw std::invalid_argument("ragged matrix");
            for (Eigen::Index c = 0; c < n_cols; ++c) m(r, c) = rows[r][c].get<double>();
        }
        return m;
    };
    auto edges = [](const nlohmann::json& arr) {
        std::vector<Edge> out;
        for (const auto& e : arr) out.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        return out;
    };
    a.vertex = matrix(j.at("vertex"), nq, ns);
    a.query_edges = edges(j.at("query_edges"));
    a.support_edges = edges(j.at("support_edges"));
    const auto& e = j.at("edge");
    if (e.empty()) {
        a.edge.resize(0, 0);
    } else {
        a.edge = matrix(e, static_cast<Eigen::Index>(a.query_edges.size()),
                        static_cast<Eigen::Index>(a.support_edges.size()));
    }
    if (ground_truth) {
        std::vector<int> cols;
        if (auto it = j.find("ground_truth"); it != j.end()) {
            for (const auto& c : *it) cols.push_back(c.is_null() ? kUnmatched : c.get<int>());
        } else {
            cols.assign(nq, kUnmatched);
        }
        *ground_truth = PartialAssignment(ns, std::move(cols));
    }
    return a;
}

}  // namespace kie
