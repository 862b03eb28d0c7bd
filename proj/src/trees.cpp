#include "mfc/trees.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfc/error.hpp"

namespace mfc {

using nlohmann::json;

FeatureTable FeatureTable::subset(std::span<const std::size_t> picked) const {
    FeatureTable out;
    out.rows = picked.size();
    out.cols = cols;
    out.names = names;
    out.values.reserve(picked.size() * cols);
    for (std::size_t r : picked) {
        const auto src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
    }
    return out;
}

std::span<const double> TreeModel::predict(std::span<const double> x) const {
    int node = 0;
    while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
        const Node& n = nodes_[static_cast<std::size_t>(node)];
        node = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return std::span<const double>(leaf_values_).subspan(nodes_[static_cast<std::size_t>(node)].leaf, outputs_);
}

std::size_t TreeModel::depth() const {
    std::vector<std::size_t> d(nodes_.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        best = std::max(best, d[i]);
        if (nodes_[i].feature >= 0) {
            d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
        }
    }
    return best;
}

json TreeModel::to_json() const {
    json f = json::array(), t = json::array(), l = json::array(), r = json::array(), leaf = json::array();
    for (const auto& n : nodes_) {
        f.push_back(n.feature);
        t.push_back(n.threshold);
        l.push_back(n.left);
        r.push_back(n.right);
        leaf.push_back(n.leaf);
    }
    return json{{"outputs", outputs_}, {"feature", f}, {"threshold", t}, {"left", l},
                {"right", r},          {"leaf", leaf}, {"values", leaf_values_}};
}

TreeModel TreeModel::from_json(const json& j) {
    TreeModel m;
    m.outputs_ = j.at("outputs").get<std::size_t>();
    const auto& f = j.at("feature");
    for (std::size_t i = 0; i < f.size(); ++i) {
        Node n;
        n.feature = f[i].get<int>();
        n.threshold = j.at("threshold")[i].get<double>();
        n.left = j.at("left")[i].get<int>();
        n.right = j.at("right")[i].get<int>();
        n.leaf = j.at("leaf")[i].get<std::size_t>();
        m.nodes_.push_back(n);
    }
    m.leaf_values_ = j.at("values").get<std::vector<double>>();
    return m;
}

// Row indices of every column sorted by (value, row); shared by all trees fitted on one table.
using ColumnOrders = std::vector<std::vector<std::size_t>>;

namespace {

ColumnOrders presort(const FeatureTable& x) {
    ColumnOrders orders(x.cols);
    for (std::size_t c = 0; c < x.cols; ++c) {
        auto& o = orders[c];
        o.resize(x.rows);
        std::iota(o.begin(), o.end(), 0);
        std::sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) {
            const double va = x.at(a, c), vb = x.at(b, c);
            return va < vb || (va == vb && a < b);
        });
    }
    return orders;
}

} // namespace

class TreeBuilder {
public:
    TreeBuilder(const FeatureTable& x, const TreeOptions& options, Rng* rng, const ColumnOrders* presorted = nullptr)
        : x_(x), options_(options), rng_(rng), presorted_(presorted) {
        if (presorted_) multiplicity_.assign(x_.rows, 0);
    }

    TreeModel classification(std::span<const int> labels, std::size_t classes, std::vector<std::size_t> rows) {
        labels_ = labels;
        classes_ = classes;
        model_.outputs_ = classes;
        grow(rows, 0);
        return std::move(model_);
    }

    TreeModel regression(std::span<const double> target, std::span<const double> hessian,
                         std::vector<std::size_t> rows) {
        target_ = target;
        hessian_ = hessian;
        model_.outputs_ = 1;
        grow(rows, 0);
        return std::move(model_);
    }

private:
    struct Split {
        int feature = -1;
        double threshold = 0.0;
        double score = 0.0;
    };

    bool classifying() const { return classes_ > 0; }

    int grow(std::vector<std::size_t>& rows, int depth) {
        const int id = static_cast<int>(model_.nodes_.size());
        model_.nodes_.emplace_back();

        Split split;
        const bool may_split = (options_.max_depth < 0 || depth < options_.max_depth) &&
                               rows.size() >= 2 * std::max<std::size_t>(options_.min_leaf, 1) && !pure(rows);
        if (may_split) split = best_split(rows);

        if (split.feature < 0) {
            make_leaf(id, rows);
            return id;
        }
        std::vector<std::size_t> left, right;
        for (std::size_t r : rows) (x_.at(r, static_cast<std::size_t>(split.feature)) <= split.threshold ? left : right).push_back(r);
        rows.clear();
        rows.shrink_to_fit();
        model_.nodes_[static_cast<std::size_t>(id)].feature = split.feature;
        model_.nodes_[static_cast<std::size_t>(id)].threshold = split.threshold;
        const int l = grow(left, depth + 1);
        const int r = grow(right, depth + 1);
        model_.nodes_[static_cast<std::size_t>(id)].left = l;
        model_.nodes_[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    bool pure(const std::vector<std::size_t>& rows) const {
        if (classifying()) {
            const int first = labels_[rows.front()];
            return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return labels_[r] == first; });
        }
        const double first = target_[rows.front()];
        return std::all_of(rows.begin(), rows.end(), [&](std::size_t r) { return target_[r] == first; });
    }

    void make_leaf(int id, const std::vector<std::size_t>& rows) {
        model_.nodes_[static_cast<std::size_t>(id)].leaf = model_.leaf_values_.size();
        if (classifying()) {
            std::vector<double> freq(classes_, 0.0);
            for (std::size_t r : rows) freq[static_cast<std::size_t>(labels_[r])] += 1.0;
            for (double& f : freq) f /= static_cast<double>(rows.size());
            model_.leaf_values_.insert(model_.leaf_values_.end(), freq.begin(), freq.end());
            return;
        }
        double num = 0.0, den = 0.0;
        for (std::size_t r : rows) {
            num += target_[r];
            den += hessian_[r];
        }
        const double value = std::clamp(num / std::max(den, 1e-12), -20.0, 20.0);
        model_.leaf_values_.push_back(value);
    }

    std::vector<std::size_t> candidate_columns() {
        std::vector<std::size_t> cols(x_.cols);
        std::iota(cols.begin(), cols.end(), 0);
        if (options_.mtry == 0 || options_.mtry >= x_.cols || rng_ == nullptr) return cols;
        for (std::size_t i = 0; i < options_.mtry; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, cols.size() - 1);
            std::swap(cols[i], cols[pick(*rng_)]);
        }
        cols.resize(options_.mtry);
        std::sort(cols.begin(), cols.end());
        return cols;
    }

    Split best_split(const std::vector<std::size_t>& rows) {
        Split best;
        bool found = false;
        const std::size_t n = rows.size();
        const std::size_t min_leaf = std::max<std::size_t>(options_.min_leaf, 1);
        order_.resize(n);

        std::vector<double>& total_counts = total_counts_;
        total_counts.assign(classes_, 0.0);
        double total_sum = 0.0;
        if (classifying()) {
            for (std::size_t r : rows) total_counts[static_cast<std::size_t>(labels_[r])] += 1.0;
        } else {
            for (std::size_t r : rows) total_sum += target_[r];
        }

        // Large nodes walk the presorted columns; small ones sort their own rows. Both give the same order.
        const bool scan = presorted_ != nullptr && n * 4 >= x_.rows;
        if (scan)
            for (std::size_t r : rows) ++multiplicity_[r];
        for (std::size_t col : candidate_columns()) {
            if (scan) {
                std::size_t i = 0;
                for (std::size_t r : (*presorted_)[col])
                    for (std::uint32_t m = 0; m < multiplicity_[r]; ++m) order_[i++] = {x_.at(r, col), r};
            } else {
                for (std::size_t i = 0; i < n; ++i) order_[i] = {x_.at(rows[i], col), rows[i]};
                std::sort(order_.begin(), order_.end());
            }
            if (order_.front().first == order_.back().first) continue;

            if (classifying()) scan_gini(col, n, min_leaf, total_counts, best, found);
            else scan_regression(col, n, min_leaf, total_sum, best, found);
        }
        if (scan)
            for (std::size_t r : rows) multiplicity_[r] = 0;
        return best;
    }

    void consider(std::size_t col, std::size_t i, double score, Split& best, bool& found) const {
        if (found && !(score < best.score - 1e-12)) return;
        const double lo = order_[i].first;
        const double hi = order_[i + 1].first;
        double mid = lo + 0.5 * (hi - lo);
        if (!(mid < hi)) mid = lo;
        best = Split{static_cast<int>(col), mid, score};
        found = true;
    }

    // Weighted Gini: n_l (1 - sum p^2) + n_r (1 - sum p^2), tracked through the sums of squared counts.
    void scan_gini(std::size_t col, std::size_t n, std::size_t min_leaf, const std::vector<double>& total_counts,
                   Split& best, bool& found) {
        left_counts_.assign(classes_, 0.0);
        right_counts_ = total_counts;
        double left_sq = 0.0, right_sq = 0.0;
        for (double c : right_counts_) right_sq += c * c;
        const double dn = static_cast<double>(n);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const auto y = static_cast<std::size_t>(labels_[order_[i].second]);
            left_sq += 2.0 * left_counts_[y] + 1.0;
            right_sq -= 2.0 * right_counts_[y] - 1.0;
            left_counts_[y] += 1.0;
            right_counts_[y] -= 1.0;
            const std::size_t nl = i + 1, nr = n - nl;
            if (order_[i].first == order_[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
            consider(col, i, dn - left_sq / static_cast<double>(nl) - right_sq / static_cast<double>(nr), best, found);
        }
    }

    void scan_regression(std::size_t col, std::size_t n, std::size_t min_leaf, double total_sum, Split& best,
                         bool& found) {
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            left_sum += target_[order_[i].second];
            const std::size_t nl = i + 1, nr = n - nl;
            if (order_[i].first == order_[i + 1].first || nl < min_leaf || nr < min_leaf) continue;
            const double right_sum = total_sum - left_sum;
            consider(col, i, -(left_sum * left_sum / static_cast<double>(nl) + right_sum * right_sum / static_cast<double>(nr)),
                     best, found);
        }
    }

    const FeatureTable& x_;
    TreeOptions options_;
    Rng* rng_;
    const ColumnOrders* presorted_;
    std::vector<std::uint32_t> multiplicity_;
    std::span<const int> labels_;
    std::size_t classes_ = 0;
    std::span<const double> target_;
    std::span<const double> hessian_;
    std::vector<std::pair<double, std::size_t>> order_;
    std::vector<double> total_counts_, left_counts_, right_counts_;
    TreeModel model_;
};

namespace {

std::vector<std::size_t> all_rows_if_empty(std::span<const std::size_t> rows, std::size_t n) {
    if (!rows.empty()) return {rows.begin(), rows.end()};
    std::vector<std::size_t> out(n);
    std::iota(out.begin(), out.end(), 0);
    return out;
}

} // namespace

namespace {

TreeModel fit_classification(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                             const TreeOptions& options, std::span<const std::size_t> rows, Rng* rng,
                             const ColumnOrders* presorted) {
    if (features.rows == 0 || labels.size() != features.rows) throw InvalidInput("tree needs non-empty, aligned data");
    if (class_count == 0) throw InvalidInput("tree needs at least one class");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count) throw InvalidInput("class label out of range");
    auto picked = all_rows_if_empty(rows, features.rows);
    if (picked.size() < std::max<std::size_t>(options.min_leaf, 1)) throw InvalidInput("fewer rows than min_leaf");
    return TreeBuilder(features, options, rng, presorted).classification(labels, class_count, std::move(picked));
}

TreeModel fit_regression(const FeatureTable& features, std::span<const double> target, std::span<const double> hessian,
                         const TreeOptions& options, std::span<const std::size_t> rows, const ColumnOrders* presorted) {
    if (features.rows == 0 || target.size() != features.rows || hessian.size() != features.rows)
        throw InvalidInput("regression tree needs non-empty, aligned data");
    return TreeBuilder(features, options, nullptr, presorted)
        .regression(target, hessian, all_rows_if_empty(rows, features.rows));
}

} // namespace

TreeModel tree_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                   const TreeOptions& options, std::span<const std::size_t> rows, Rng* rng) {
    return fit_classification(features, labels, class_count, options, rows, rng, nullptr);
}

TreeModel regression_tree_fit(const FeatureTable& features, std::span<const double> target,
                              std::span<const double> hessian, const TreeOptions& options,
                              std::span<const std::size_t> rows) {
    return fit_regression(features, target, hessian, options, rows, nullptr);
}

std::vector<double> ForestModel::predict_proba(std::span<const double> x, std::size_t limit) const {
    const std::size_t use = limit == 0 ? trees_.size() : std::min(limit, trees_.size());
    std::vector<double> p(classes_, 0.0);
    for (std::size_t t = 0; t < use; ++t) {
        const auto leaf = trees_[t].predict(x);
        for (std::size_t l = 0; l < classes_; ++l) p[l] += leaf[l];
    }
    for (double& v : p) v /= static_cast<double>(use);
    return p;
}

json ForestModel::to_json() const {
    json trees = json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return json{{"classes", classes_}, {"mtry", mtry_}, {"tree_seeds", tree_seeds_}, {"trees", trees}};
}

ForestModel ForestModel::from_json(const json& j) {
    ForestModel m;
    m.classes_ = j.at("classes").get<std::size_t>();
    m.mtry_ = j.at("mtry").get<std::size_t>();
    m.tree_seeds_ = j.at("tree_seeds").get<std::vector<std::uint64_t>>();
    for (const auto& t : j.at("trees")) m.trees_.push_back(TreeModel::from_json(t));
    return m;
}

ForestModel forest_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                       const ForestOptions& options) {
    if (options.mtry > features.cols) throw InvalidInput("mtry exceeds the number of feature columns");
    if (options.n_trees == 0) throw InvalidInput("forest needs at least one tree");
    if (features.rows == 0 || labels.size() != features.rows) throw InvalidInput("forest needs non-empty, aligned data");

    ForestModel m;
    m.classes_ = class_count;
    m.mtry_ = options.mtry == 0 ? features.cols : options.mtry;
    TreeOptions tree_options{options.max_depth, options.min_leaf, m.mtry_};
    const std::size_t n = features.rows;
    const ColumnOrders orders = presort(features);
    for (std::size_t t = 0; t < options.n_trees; ++t) {
        const std::uint64_t seed = derive_seed(options.seed, {t});
        Rng rng(seed);
        std::vector<std::size_t> rows(n);
        if (options.bootstrap) {
            std::uniform_int_distribution<std::size_t> draw(0, n - 1);
            for (auto& r : rows) r = draw(rng);
        } else {
            std::iota(rows.begin(), rows.end(), 0);
        }
        m.trees_.push_back(fit_classification(features, labels, class_count, tree_options, rows, &rng, &orders));
        m.tree_seeds_.push_back(seed);
        m.in_bag_.push_back(std::move(rows));
    }
    return m;
}

double forest_oob_accuracy(const ForestModel& forest, const FeatureTable& features, std::span<const int> labels,
                           std::uint64_t seed) {
    const std::size_t n = features.rows;
    const std::size_t L = forest.classes();
    std::vector<double> sums(n * L, 0.0);
    std::vector<std::size_t> votes(n, 0);
    const auto& bags = forest.in_bag();
    std::vector<char> in(n);
    for (std::size_t t = 0; t < forest.size(); ++t) {
        std::fill(in.begin(), in.end(), 0);
        for (std::size_t r : bags[t]) in[r] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            if (in[i]) continue;
            const auto leaf = forest.tree(t).predict(features.row(i));
            for (std::size_t l = 0; l < L; ++l) sums[i * L + l] += leaf[l];
            ++votes[i];
        }
    }
    double correct = 0.0, scored = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (votes[i] == 0) continue;
        Rng rng(derive_seed(seed, {i}));
        const std::span<const double> p(sums.data() + i * L, L);
        if (static_cast<int>(argmax_random_tie(p, rng)) == labels[i]) correct += 1.0;
        scored += 1.0;
    }
    return correct / std::max(scored, 1.0);
}

std::vector<double> BoostModel::predict_proba(std::span<const double> x, std::size_t limit) const {
    std::vector<double> scores(models_.size());
    for (std::size_t k = 0; k < models_.size(); ++k) {
        const auto& b = models_[k];
        const std::size_t use = limit == 0 ? b.trees.size() : std::min(limit, b.trees.size());
        double f = b.init;
        for (std::size_t t = 0; t < use; ++t) f += shrinkage_ * b.trees[t].predict(x)[0];
        scores[k] = 1.0 / (1.0 + std::exp(-f));
    }
    if (classes_ == 2) return {1.0 - scores[0], scores[0]};
    const double sum = std::accumulate(scores.begin(), scores.end(), 0.0);
    for (double& s : scores) s /= sum;
    return scores;
}

json BoostModel::to_json() const {
    json models = json::array();
    for (const auto& b : models_) {
        json trees = json::array();
        for (const auto& t : b.trees) trees.push_back(t.to_json());
        models.push_back(json{{"init", b.init}, {"trees", trees}});
    }
    return json{{"classes", classes_}, {"shrinkage", shrinkage_}, {"models", models}};
}

BoostModel BoostModel::from_json(const json& j) {
    BoostModel m;
    m.classes_ = j.at("classes").get<std::size_t>();
    m.shrinkage_ = j.at("shrinkage").get<double>();
    for (const auto& b : j.at("models")) {
        Binary bin;
        bin.init = b.at("init").get<double>();
        for (const auto& t : b.at("trees")) bin.trees.push_back(TreeModel::from_json(t));
        m.models_.push_back(std::move(bin));
    }
    return m;
}

BoostModel boost_fit(const FeatureTable& features, std::span<const int> labels, std::size_t class_count,
                     const BoostOptions& options) {
    if (features.rows == 0 || labels.size() != features.rows) throw InvalidInput("boosting needs non-empty, aligned data");
    if (class_count < 2) throw InvalidInput("boosting needs at least two classes");
    if (!(options.shrinkage > 0.0)) throw InvalidInput("shrinkage must be positive");
    if (!(options.subsample > 0.0 && options.subsample <= 1.0)) throw InvalidInput("subsample must lie in (0, 1]");
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= class_count) throw InvalidInput("class label out of range");

    BoostModel m;
    m.classes_ = class_count;
    m.shrinkage_ = options.shrinkage;
    const std::size_t n = features.rows;
    const std::size_t binaries = class_count == 2 ? 1 : class_count;
    const TreeOptions tree_options{options.interaction_depth, options.min_leaf, 0};
    const ColumnOrders orders = presort(features);

    for (std::size_t k = 0; k < binaries; ++k) {
        const int positive = class_count == 2 ? 1 : static_cast<int>(k);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == positive ? 1.0 : 0.0;
        const double prior = std::clamp(std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);

        BoostModel::Binary bin;
        bin.init = std::log(prior / (1.0 - prior));
        std::vector<double> f(n, bin.init), residual(n), hessian(n);
        Rng rng(derive_seed(options.seed, {k}));
        std::vector<std::size_t> all(n);
        std::iota(all.begin(), all.end(), 0);

        for (std::size_t round = 0; round < options.n_trees; ++round) {
            for (std::size_t i = 0; i < n; ++i) {
                const double p = 1.0 / (1.0 + std::exp(-f[i]));
                residual[i] = y[i] - p;
                hessian[i] = p * (1.0 - p);
            }
            std::vector<std::size_t> rows;
            if (options.subsample < 1.0) {
                rows = all;
                std::shuffle(rows.begin(), rows.end(), rng);
                rows.resize(std::max<std::size_t>(1, static_cast<std::size_t>(options.subsample * static_cast<double>(n))));
                std::sort(rows.begin(), rows.end());
            }
            TreeModel tree = fit_regression(features, residual, hessian, tree_options, rows, &orders);
            for (std::size_t i = 0; i < n; ++i) f[i] += options.shrinkage * tree.predict(features.row(i))[0];
            bin.trees.push_back(std::move(tree));
        }
        m.models_.push_back(std::move(bin));
    }
    return m;
}

} // namespace mfc
