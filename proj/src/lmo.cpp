#include "weakloc/lmo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

#include "weakloc/common.hpp"

namespace weakloc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Search state for the exact oracle. Rows are local (0-based within the
/// video). Unforced rows always sit at their cheapest allowed class, so the
/// current cost is a valid lower bound before bag repairs are priced in.
struct Search {
    const Eigen::MatrixXd& G;
    int n = 0;
    int K = 0;
    std::vector<char> allowed;      // n*K, 0 where fixed_zero or pinned elsewhere
    std::vector<char> forced;       // rows whose class may not change below this node
    std::vector<int> assign;        // current class per row
    std::vector<const Bag*> bags;   // local-row copies
    std::vector<std::vector<int>> bag_rows;   // local rows per bag
    std::vector<std::vector<int>> bags_of_row;
    std::vector<int> sat_count;     // rows currently matching the bag class
    double cost = 0.0;

    double best_value = kInf;
    std::vector<int> best_assign;

    std::vector<std::tuple<int, double, int>> scratch_;  // (class, -cheapest, bag)
    std::vector<int> row_stamp_;
    int stamp_ = 0;

    explicit Search(const Eigen::MatrixXd& g) : G(g) {}

    bool is_allowed(int row, int cls) const {
        return allowed[static_cast<std::size_t>(row) * K + cls] != 0;
    }

    /// Cheapest allowed class for a row; lowest class index wins ties.
    int argmin_class(int row) const {
        int best = -1;
        double bestv = kInf;
        for (int k = 0; k < K; ++k) {
            if (!is_allowed(row, k)) continue;
            double v = G(row, k);
            if (v < bestv) {
                bestv = v;
                best = k;
            }
        }
        return best;
    }

    void switch_row(int row, int cls) {
        int old = assign[static_cast<std::size_t>(row)];
        if (old == cls) return;
        cost += G(row, cls) - G(row, old);
        for (int b : bags_of_row[static_cast<std::size_t>(row)]) {
            if (bags[static_cast<std::size_t>(b)]->class_id == old) --sat_count[static_cast<std::size_t>(b)];
            if (bags[static_cast<std::size_t>(b)]->class_id == cls) ++sat_count[static_cast<std::size_t>(b)];
        }
        assign[static_cast<std::size_t>(row)] = cls;
    }

    std::vector<int> unsatisfied() const {
        std::vector<int> out;
        for (int b = 0; b < static_cast<int>(bags.size()); ++b) {
            if (sat_count[static_cast<std::size_t>(b)] == 0) out.push_back(b);
        }
        return out;
    }

    double regret(int row, int cls) const {
        return G(row, cls) - G(row, assign[static_cast<std::size_t>(row)]);
    }

    /// Admissible completion bound: every unsatisfied bag needs a witness
    /// row switched to the bag's class. Witnesses of different classes are
    /// distinct rows, as are witnesses of row-disjoint bags within one
    /// class, so those per-bag minima add. Within a class, bags are charged
    /// in descending order of their cheapest regret and a bag sharing a row
    /// with one already charged is skipped (a shared witness could serve
    /// both). Returns infinity when some bag has no available row.
    double completion_bound(const std::vector<int>& unsat) {
        scratch_.clear();
        for (int b : unsat) {
            int cls = bags[static_cast<std::size_t>(b)]->class_id;
            double cheapest = kInf;
            for (int row : bag_rows[static_cast<std::size_t>(b)]) {
                if (forced[static_cast<std::size_t>(row)] || !is_allowed(row, cls)) continue;
                cheapest = std::min(cheapest, regret(row, cls));
            }
            if (cheapest == kInf) return kInf;  // bag cannot be repaired here
            scratch_.push_back({cls, -cheapest, b});
        }
        std::sort(scratch_.begin(), scratch_.end());
        double bound = 0.0;
        int prev_cls = -1;
        for (const auto& [cls, neg_cheapest, b] : scratch_) {
            if (cls != prev_cls) {
                ++stamp_;  // row marks from other classes must not block
                prev_cls = cls;
            }
            bool clash = false;
            for (int row : bag_rows[static_cast<std::size_t>(b)]) {
                if (row_stamp_[static_cast<std::size_t>(row)] == stamp_) {
                    clash = true;
                    break;
                }
            }
            if (clash) continue;
            bound -= neg_cheapest;
            for (int row : bag_rows[static_cast<std::size_t>(b)]) {
                row_stamp_[static_cast<std::size_t>(row)] = stamp_;
            }
        }
        return bound;
    }

    /// Fail-first bag choice: fewest available repair rows, then lowest
    /// class, then construction order.
    int pick_bag(const std::vector<int>& unsat) const {
        int chosen = -1;
        int chosen_avail = std::numeric_limits<int>::max();
        for (int b : unsat) {
            int cls = bags[static_cast<std::size_t>(b)]->class_id;
            int avail = 0;
            for (int row : bag_rows[static_cast<std::size_t>(b)]) {
                if (!forced[static_cast<std::size_t>(row)] && is_allowed(row, cls)) ++avail;
            }
            if (chosen < 0 || avail < chosen_avail ||
                (avail == chosen_avail &&
                 bags[static_cast<std::size_t>(b)]->class_id < bags[static_cast<std::size_t>(chosen)]->class_id)) {
                chosen = b;
                chosen_avail = avail;
            }
        }
        return chosen;
    }

    /// Greedy min-regret repair from the current state; used once at the
    /// root to seed the incumbent. May fail on adversarial interactions
    /// (repairs un-satisfying earlier bags), in which case the exact search
    /// simply starts from an infinite incumbent.
    void seed_incumbent() {
        std::vector<int> saved_assign = assign;
        double saved_cost = cost;
        std::vector<int> saved_sat = sat_count;

        std::size_t budget = (bags.size() + 1) * static_cast<std::size_t>(n + 1);
        bool ok = true;
        while (ok) {
            std::vector<int> unsat = unsatisfied();
            if (unsat.empty()) break;
            if (budget-- == 0) {
                ok = false;
                break;
            }
            int b = pick_bag(unsat);
            int cls = bags[static_cast<std::size_t>(b)]->class_id;
            int pick = -1;
            double pickv = kInf;
            for (int row : bag_rows[static_cast<std::size_t>(b)]) {
                if (forced[static_cast<std::size_t>(row)] || !is_allowed(row, cls)) continue;
                double v = regret(row, cls);
                if (v < pickv) {
                    pickv = v;
                    pick = row;
                }
            }
            if (pick < 0) {
                ok = false;
                break;
            }
            switch_row(pick, cls);
        }
        if (ok) {
            best_value = cost;
            best_assign = assign;
        }
        assign = std::move(saved_assign);
        cost = saved_cost;
        sat_count = std::move(saved_sat);
    }

    void run() {
        std::vector<int> unsat = unsatisfied();
        if (unsat.empty()) {
            if (cost < best_value) {
                best_value = cost;
                best_assign = assign;
            }
            return;
        }
        double lb = completion_bound(unsat);
        if (lb == kInf || cost + lb >= best_value) return;

        int b = pick_bag(unsat);
        int cls = bags[static_cast<std::size_t>(b)]->class_id;
        // Candidate witnesses, cheapest regret first so good incumbents
        // appear early; row index breaks ties.
        std::vector<std::pair<double, int>> cand;
        for (int row : bag_rows[static_cast<std::size_t>(b)]) {
            if (forced[static_cast<std::size_t>(row)] || !is_allowed(row, cls)) continue;
            cand.emplace_back(regret(row, cls), row);
        }
        std::sort(cand.begin(), cand.end());
        // Branch i pins candidate i as the bag's first witness; later
        // branches drop earlier candidates from this class so the subtrees
        // partition the feasible set instead of overlapping.
        for (const auto& [r, row] : cand) {
            int old = assign[static_cast<std::size_t>(row)];
            switch_row(row, cls);
            forced[static_cast<std::size_t>(row)] = 1;
            run();
            forced[static_cast<std::size_t>(row)] = 0;
            switch_row(row, old);
            allowed[static_cast<std::size_t>(row) * K + cls] = 0;
        }
        for (const auto& [r, row] : cand) {
            allowed[static_cast<std::size_t>(row) * K + cls] = 1;
        }
    }
};

void check_dims(const VideoConstraintSet& set, const Eigen::MatrixXd& G) {
    if (G.rows() != set.num_rows()) {
        throw DataError("gradient block has " + std::to_string(G.rows()) + " rows, video " +
                        set.video_id + " has " + std::to_string(set.num_rows()));
    }
    if (G.cols() < 1) throw DataError("gradient block has no class columns");
}

}  // namespace

Eigen::MatrixXd BlockVertex::to_matrix(int num_label_columns) const {
    Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes.size()),
                                              num_label_columns);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        Y(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
    }
    return Y;
}

BlockVertex lmo(const VideoConstraintSet& set, const Eigen::MatrixXd& G) {
    check_dims(set, G);
    Search s(G);
    s.n = static_cast<int>(set.num_rows());
    s.K = static_cast<int>(G.cols());
    s.allowed.assign(static_cast<std::size_t>(s.n) * s.K, 1);
    s.forced.assign(static_cast<std::size_t>(s.n), 0);
    s.row_stamp_.assign(static_cast<std::size_t>(s.n), 0);

    auto local = [&](std::int64_t row) { return static_cast<int>(row - set.row_begin); };
    for (const auto& [row, cls] : set.fixed_zero) {
        s.allowed[static_cast<std::size_t>(local(row)) * s.K + cls] = 0;
    }
    for (const auto& [row, cls] : set.fixed_one) {
        int r = local(row);
        for (int k = 0; k < s.K; ++k) {
            s.allowed[static_cast<std::size_t>(r) * s.K + k] = (k == cls) ? 1 : 0;
        }
        s.forced[static_cast<std::size_t>(r)] = 1;
    }

    s.assign.resize(static_cast<std::size_t>(s.n));
    for (int r = 0; r < s.n; ++r) {
        int cls = s.argmin_class(r);
        if (cls < 0) {
            throw DataError("row " + std::to_string(set.row_begin + r) + " in video " +
                            set.video_id + " has no allowed class");
        }
        s.assign[static_cast<std::size_t>(r)] = cls;
        s.cost += G(r, cls);
    }

    s.bags.reserve(set.bags.size());
    s.bag_rows.reserve(set.bags.size());
    s.bags_of_row.assign(static_cast<std::size_t>(s.n), {});
    for (const Bag& bag : set.bags) {
        int b = static_cast<int>(s.bags.size());
        s.bags.push_back(&bag);
        std::vector<int> rows;
        rows.reserve(bag.rows.size());
        for (std::int64_t row : bag.rows) {
            rows.push_back(local(row));
            s.bags_of_row[static_cast<std::size_t>(local(row))].push_back(b);
        }
        s.bag_rows.push_back(std::move(rows));
    }
    s.sat_count.assign(s.bags.size(), 0);
    for (std::size_t b = 0; b < s.bags.size(); ++b) {
        for (int row : s.bag_rows[b]) {
            if (s.assign[static_cast<std::size_t>(row)] == s.bags[b]->class_id) ++s.sat_count[b];
        }
    }

    s.seed_incumbent();
    s.run();
    if (s.best_value == kInf) {
        throw DataError("unsatisfiable constraint set for video " + set.video_id);
    }
    BlockVertex v;
    v.video_id = set.video_id;
    v.classes = std::move(s.best_assign);
    // Re-price in row order so the value is free of search-path rounding.
    v.value = 0.0;
    for (int r = 0; r < s.n; ++r) v.value += G(r, v.classes[static_cast<std::size_t>(r)]);
    return v;
}

BlockVertex lmo_bruteforce(const VideoConstraintSet& set, const Eigen::MatrixXd& G) {
    check_dims(set, G);
    const int n = static_cast<int>(set.num_rows());
    const int K = static_cast<int>(G.cols());
    double combos = std::pow(static_cast<double>(K), n);
    if (combos > 1e7) {
        throw DataError("brute-force oracle limit exceeded: " + std::to_string(K) + "^" +
                        std::to_string(n));
    }
    std::vector<int> classes(static_cast<std::size_t>(n), 0);
    BlockVertex best;
    best.video_id = set.video_id;
    best.value = kInf;
    while (true) {
        if (is_feasible_integer(set, classes)) {
            double value = 0.0;
            for (int r = 0; r < n; ++r) value += G(r, classes[static_cast<std::size_t>(r)]);
            if (value < best.value) {
                best.value = value;
                best.classes = classes;
            }
        }
        int pos = n - 1;
        while (pos >= 0 && classes[static_cast<std::size_t>(pos)] == K - 1) {
            classes[static_cast<std::size_t>(pos)] = 0;
            --pos;
        }
        if (pos < 0) break;
        ++classes[static_cast<std::size_t>(pos)];
    }
    if (best.value == kInf) {
        throw DataError("unsatisfiable constraint set for video " + set.video_id);
    }
    return best;
}

}  // namespace weakloc
