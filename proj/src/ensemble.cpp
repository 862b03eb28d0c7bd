#include "mfc/ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfc/error.hpp"

namespace mfc {

using nlohmann::json;

namespace {

constexpr int kFormatVersion = 1;

std::string kind_name(SuperKind k) {
    switch (k) {
    case SuperKind::LC: return "LC";
    case SuperKind::RF: return "RF";
    case SuperKind::GB: return "GB";
    }
    return "?";
}

SuperKind parse_kind(const std::string& s) {
    if (s == "LC") return SuperKind::LC;
    if (s == "RF") return SuperKind::RF;
    if (s == "GB") return SuperKind::GB;
    throw InvalidInput("unknown super-learner kind '" + s + "'");
}

std::uint64_t row_seed(std::uint64_t seed, std::size_t row) { return derive_seed(seed, {hash_string("row"), row}); }

std::vector<std::size_t> positions_where(const InnerSplits& s, std::size_t fold, bool in_fold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < s.fold_of.size(); ++i)
        if ((static_cast<std::size_t>(s.fold_of[i]) == fold) == in_fold) out.push_back(i);
    return out;
}

ProbMatrix subset_rows(const ProbMatrix& p, std::span<const std::size_t> rows) {
    ProbMatrix out(rows.size(), p.classes);
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(p.row(rows[i]).begin(), p.row(rows[i]).end(), out.row(i).begin());
    return out;
}

void check_inputs(const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                  std::span<const int> labels, std::size_t class_count) {
    if (probs.empty()) throw InvalidInput("an ensemble needs at least one weak learner");
    for (const auto* p : probs)
        if (p->rows != labels.size() || p->classes != class_count)
            throw InvalidInput("weak-learner probabilities are misaligned with the labels");
    if (covariates && covariates->rows != labels.size()) throw InvalidInput("covariate rows are misaligned with the labels");
}

} // namespace

std::string super_name(SuperKind kind, MeasureMode mode) {
    if (kind == SuperKind::LC) return "LC";
    return kind_name(kind) + (mode == MeasureMode::TypeI ? "-I" : "-II");
}

std::vector<std::size_t> resolve_mtry(const std::vector<std::string>& rules, std::size_t columns) {
    std::vector<std::size_t> out;
    const auto F = static_cast<double>(columns);
    for (const auto& rule : rules) {
        std::size_t m;
        if (rule == "sqrt") m = static_cast<std::size_t>(std::ceil(std::sqrt(F)));
        else if (rule == "third") m = static_cast<std::size_t>(std::ceil(F / 3.0));
        else if (rule == "all") m = columns;
        else {
            std::size_t used = 0;
            long long v = -1;
            try {
                v = std::stoll(rule, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != rule.size() || v < 1) throw InvalidInput("invalid mtry rule '" + rule + "'");
            m = static_cast<std::size_t>(v);
        }
        m = std::clamp<std::size_t>(m, 1, std::max<std::size_t>(columns, 1));
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

json SuperParams::to_json() const {
    json j{{"kind", kind_name(kind)}};
    if (kind == SuperKind::RF) {
        j["n_trees"] = n_trees;
        j["mtry"] = mtry;
    } else if (kind == SuperKind::GB) {
        j["n_trees"] = n_trees;
        j["shrinkage"] = shrinkage;
        j["interaction_depth"] = depth;
        j["min_leaf"] = min_leaf;
    }
    return j;
}

SuperParams SuperParams::from_json(const json& j) {
    SuperParams p;
    p.kind = parse_kind(j.at("kind").get<std::string>());
    if (p.kind == SuperKind::RF) {
        p.n_trees = j.at("n_trees").get<std::size_t>();
        p.mtry = j.at("mtry").get<std::size_t>();
    } else if (p.kind == SuperKind::GB) {
        p.n_trees = j.at("n_trees").get<std::size_t>();
        p.shrinkage = j.at("shrinkage").get<double>();
        p.depth = j.at("interaction_depth").get<int>();
        p.min_leaf = j.at("min_leaf").get<std::size_t>();
    }
    return p;
}

FeatureTable build_features(const std::vector<const ProbMatrix*>& probs, const std::vector<std::string>& names,
                            const FeatureTable* covariates) {
    if (probs.empty() || names.size() != probs.size()) throw InvalidInput("feature table needs named learners");
    const std::size_t n = probs.front()->rows;
    const std::size_t L = probs.front()->classes;
    const std::size_t per = L == 2 ? 1 : L;
    FeatureTable t;
    t.rows = n;
    t.cols = probs.size() * per + (covariates ? covariates->cols : 0);
    for (std::size_t m = 0; m < probs.size(); ++m) {
        if (probs[m]->rows != n || probs[m]->classes != L) throw InvalidInput("weak-learner probabilities are misaligned");
        for (std::size_t l = 0; l < per; ++l) t.names.push_back(names[m] + "#p" + std::to_string(l + 1));
    }
    if (covariates) {
        if (covariates->rows != n) throw InvalidInput("covariate rows are misaligned");
        t.names.insert(t.names.end(), covariates->names.begin(), covariates->names.end());
    }
    t.values.reserve(n * t.cols);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto* p : probs)
            for (std::size_t l = 0; l < per; ++l) t.values.push_back((*p)(i, l));
        if (covariates) {
            const auto c = covariates->row(i);
            t.values.insert(t.values.end(), c.begin(), c.end());
        }
    }
    return t;
}

std::vector<double> feature_row(const std::vector<std::vector<double>>& probs, std::span<const double> covariates) {
    std::vector<double> row;
    for (const auto& p : probs) {
        const std::size_t per = p.size() == 2 ? 1 : p.size();
        row.insert(row.end(), p.begin(), p.begin() + static_cast<std::ptrdiff_t>(per));
    }
    row.insert(row.end(), covariates.begin(), covariates.end());
    return row;
}

double fold_accuracy(const ProbMatrix& probs, std::span<const int> labels, const InnerSplits& splits,
                     std::uint64_t seed, std::vector<double>* per_fold) {
    if (probs.rows != labels.size() || splits.fold_of.size() != labels.size())
        throw InvalidInput("fold accuracy inputs are misaligned");
    const auto folds = static_cast<std::size_t>(splits.folds);
    std::vector<double> correct(folds, 0.0), size(folds, 0.0);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const auto f = static_cast<std::size_t>(splits.fold_of[i]);
        Rng rng(row_seed(seed, i));
        if (static_cast<int>(argmax_random_tie(probs.row(i), rng)) == labels[i]) correct[f] += 1.0;
        size[f] += 1.0;
    }
    double mean = 0.0;
    std::size_t used = 0;
    std::vector<double> accs(folds, 0.0);
    for (std::size_t f = 0; f < folds; ++f) {
        if (size[f] == 0.0) continue;
        accs[f] = correct[f] / size[f];
        mean += accs[f];
        ++used;
    }
    if (per_fold) *per_fold = std::move(accs);
    return mean / static_cast<double>(std::max<std::size_t>(used, 1));
}

SuperTune tune_super(SuperKind kind, const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                     std::span<const int> labels, std::size_t class_count, const InnerSplits& splits,
                     const SuperGrid& grid, std::uint64_t seed) {
    check_inputs(probs, covariates, labels, class_count);
    if (splits.fold_of.size() != labels.size() || splits.folds < 2) throw InvalidInput("malformed inner splits");
    const auto folds = static_cast<std::size_t>(splits.folds);

    // Candidate grid points in their listed order; correct[g][f] counts hits.
    std::vector<SuperParams> points;
    FeatureTable features;
    if (kind == SuperKind::LC) {
        points.push_back(SuperParams{SuperKind::LC});
    } else {
        std::vector<std::string> names(probs.size());
        for (std::size_t m = 0; m < probs.size(); ++m) names[m] = "m" + std::to_string(m);
        features = build_features(probs, names, covariates);
        if (kind == SuperKind::RF) {
            for (std::size_t mtry : resolve_mtry(grid.rf_mtry, features.cols))
                for (std::size_t t : grid.rf_trees) points.push_back(SuperParams{SuperKind::RF, t, mtry});
        } else {
            for (double nu : grid.gb_shrinkage)
                for (int depth : grid.gb_depth)
                    for (std::size_t t : grid.gb_trees)
                        points.push_back(SuperParams{SuperKind::GB, t, 0, nu, depth, grid.gb_min_leaf});
        }
    }
    if (points.empty()) throw InvalidInput("super-learner tuning grid is empty");

    std::vector<std::vector<double>> correct(points.size(), std::vector<double>(folds, 0.0));
    std::vector<double> fold_size(folds, 0.0);
    auto score = [&](std::size_t g, std::size_t f, std::size_t pos, std::span<const double> p) {
        Rng rng(row_seed(seed, pos));
        if (static_cast<int>(argmax_random_tie(p, rng)) == labels[pos]) correct[g][f] += 1.0;
    };

    for (std::size_t f = 0; f < folds; ++f) {
        const auto train = positions_where(splits, f, false);
        const auto valid = positions_where(splits, f, true);
        fold_size[f] = static_cast<double>(valid.size());
        if (valid.empty()) continue;
        if (train.empty()) throw InvalidInput("inner fold leaves no training rows");
        std::vector<int> y(train.size());
        for (std::size_t i = 0; i < train.size(); ++i) y[i] = labels[train[i]];

        if (kind == SuperKind::LC) {
            std::vector<ProbMatrix> sub;
            for (const auto* p : probs) sub.push_back(subset_rows(*p, train));
            const auto fit = lce_fit(sub, y);
            for (std::size_t v : valid) {
                std::vector<std::vector<double>> pv;
                for (const auto* p : probs) pv.emplace_back(p->row(v).begin(), p->row(v).end());
                score(0, f, v, lce_predict(fit.weights, pv));
            }
            continue;
        }

        const FeatureTable xtrain = features.subset(train);
        std::size_t g = 0;
        while (g < points.size()) {
            // Points sharing everything but n_trees are scored from one staged fit.
            std::size_t end = g;
            std::size_t max_trees = 0;
            while (end < points.size() && points[end].mtry == points[g].mtry &&
                   points[end].shrinkage == points[g].shrinkage && points[end].depth == points[g].depth) {
                max_trees = std::max(max_trees, points[end].n_trees);
                ++end;
            }
            const std::uint64_t fit_seed = derive_seed(seed, {hash_string("tune"), f, g});
            if (kind == SuperKind::RF) {
                ForestOptions opt;
                opt.n_trees = std::max<std::size_t>(max_trees, 1);
                opt.mtry = points[g].mtry;
                opt.seed = fit_seed;
                const ForestModel forest = forest_fit(xtrain, y, class_count, opt);
                std::vector<double> acc(class_count);
                for (std::size_t v : valid) {
                    std::fill(acc.begin(), acc.end(), 0.0);
                    const auto x = features.row(v);
                    std::size_t used = 0;
                    for (std::size_t t = 0; t < forest.size(); ++t) {
                        const auto leaf = forest.tree(t).predict(x);
                        for (std::size_t l = 0; l < class_count; ++l) acc[l] += leaf[l];
                        ++used;
                        for (std::size_t q = g; q < end; ++q) {
                            if (points[q].n_trees != used) continue;
                            std::vector<double> p(acc);
                            for (double& value : p) value /= static_cast<double>(used);
                            score(q, f, v, p);
                        }
                    }
                }
            } else {
                BoostOptions opt;
                opt.n_trees = max_trees;
                opt.shrinkage = points[g].shrinkage;
                opt.interaction_depth = points[g].depth;
                opt.min_leaf = points[g].min_leaf;
                opt.seed = fit_seed;
                const BoostModel boost = boost_fit(xtrain, y, class_count, opt);
                for (std::size_t v : valid)
                    for (std::size_t q = g; q < end; ++q)
                        score(q, f, v, boost.predict_proba(features.row(v), points[q].n_trees == 0 ? 0 : points[q].n_trees));
            }
            g = end;
        }
    }

    SuperTune best;
    bool found = false;
    for (std::size_t g = 0; g < points.size(); ++g) {
        std::vector<double> accs(folds, 0.0);
        double mean = 0.0;
        std::size_t used = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            if (fold_size[f] == 0.0) continue;
            accs[f] = correct[g][f] / fold_size[f];
            mean += accs[f];
            ++used;
        }
        mean /= static_cast<double>(std::max<std::size_t>(used, 1));
        if (!found || mean > best.accuracy) {
            best = SuperTune{points[g], mean, std::move(accs)};
            found = true;
        }
    }
    return best;
}

EnsembleModel fit_super(SuperKind kind, MeasureMode mode, const std::vector<std::string>& names,
                        const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                        std::span<const int> labels, std::size_t class_count, const SuperParams& params,
                        std::uint64_t seed) {
    check_inputs(probs, covariates, labels, class_count);
    if (names.size() != probs.size()) throw InvalidInput("learner names and probabilities differ in count");
    if (kind == SuperKind::LC && mode == MeasureMode::TypeII)
        throw InvalidInput("the linear combination cannot take measure covariates");
    if (mode == MeasureMode::TypeI && covariates) throw InvalidInput("type I ensembles take no covariates");

    EnsembleModel model;
    model.kind = kind;
    model.mode = mode;
    model.classes = class_count;
    model.learners = names;
    if (covariates) model.covariates = covariates->names;
    model.params = params;
    model.params.kind = kind;

    const std::uint64_t fit_seed = derive_seed(seed, {hash_string("final")});
    if (kind == SuperKind::LC) {
        std::vector<ProbMatrix> copies;
        for (const auto* p : probs) copies.push_back(*p);
        model.weights = lce_fit(copies, labels).weights;
        return model;
    }
    const FeatureTable features = build_features(probs, names, covariates);
    if (kind == SuperKind::RF) {
        ForestOptions opt;
        opt.n_trees = params.n_trees;
        opt.mtry = params.mtry;
        opt.seed = fit_seed;
        model.forest = forest_fit(features, labels, class_count, opt);
    } else {
        BoostOptions opt;
        opt.n_trees = params.n_trees;
        opt.shrinkage = params.shrinkage;
        opt.interaction_depth = params.depth;
        opt.min_leaf = params.min_leaf;
        opt.seed = fit_seed;
        model.boost = boost_fit(features, labels, class_count, opt);
    }
    return model;
}

std::pair<std::vector<double>, std::size_t> ensemble_predict(const EnsembleModel& model,
                                                             const std::vector<std::vector<double>>& probs,
                                                             std::span<const double> covariates, Rng& rng) {
    if (probs.size() != model.learners.size()) throw InvalidInput("weak-learner inputs do not match the ensemble");
    if (covariates.size() != model.covariates.size()) throw InvalidInput("covariates do not match the ensemble");
    for (const auto& p : probs)
        if (p.size() != model.classes) throw InvalidInput("probability vector length does not match the class count");

    std::vector<double> p;
    if (model.passthrough || model.kind == SuperKind::LC) p = lce_predict(model.weights, probs);
    else if (model.forest) p = model.forest->predict_proba(feature_row(probs, covariates));
    else if (model.boost) p = model.boost->predict_proba(feature_row(probs, covariates));
    else throw InvalidInput("ensemble has no fitted super-learner");
    const std::size_t cls = argmax_random_tie(p, rng);
    return {std::move(p), cls};
}

EnsembleModel forward_select(SuperKind kind, MeasureMode mode, const std::vector<std::string>& names,
                             const std::vector<const ProbMatrix*>& probs, const FeatureTable* covariates,
                             std::span<const int> labels, std::size_t class_count, const InnerSplits& splits,
                             const SuperGrid& grid, std::uint64_t seed) {
    check_inputs(probs, covariates, labels, class_count);
    if (names.size() != probs.size()) throw InvalidInput("learner names and probabilities differ in count");

    if (probs.size() == 1 && covariates == nullptr) {
        EnsembleModel model;
        model.kind = kind;
        model.mode = mode;
        model.classes = class_count;
        model.learners = names;
        model.params.kind = kind;
        model.passthrough = true;
        model.weights = {1.0};
        model.inner_accuracy = fold_accuracy(*probs.front(), labels, splits, seed);
        model.trail.push_back(TrailStep{names.front(), std::nullopt, true});
        return model;
    }

    std::vector<std::size_t> selected{0};
    std::vector<TrailStep> trail{TrailStep{names[0], std::nullopt, true}};
    auto tune_with = [&](const std::vector<std::size_t>& members) {
        std::vector<const ProbMatrix*> sub;
        for (std::size_t m : members) sub.push_back(probs[m]);
        return tune_super(kind, sub, covariates, labels, class_count, splits, grid, seed);
    };

    SuperTune best;
    if (probs.size() == 1) {
        best = tune_with(selected);
        trail.front().accuracy = best.accuracy;
    } else {
        selected.push_back(1);
        best = tune_with(selected);
        trail.push_back(TrailStep{names[1], best.accuracy, true});
        for (std::size_t c = 2; c < probs.size(); ++c) {
            auto trial = selected;
            trial.push_back(c);
            SuperTune t = tune_with(trial);
            const bool keep = t.accuracy > best.accuracy;
            trail.push_back(TrailStep{names[c], t.accuracy, keep});
            if (keep) {
                selected = std::move(trial);
                best = std::move(t);
            }
        }
    }

    std::vector<std::string> chosen_names;
    std::vector<const ProbMatrix*> chosen;
    for (std::size_t m : selected) {
        chosen_names.push_back(names[m]);
        chosen.push_back(probs[m]);
    }
    EnsembleModel model = fit_super(kind, mode, chosen_names, chosen, covariates, labels, class_count, best.params, seed);
    model.trail = std::move(trail);
    model.inner_accuracy = best.accuracy;
    return model;
}

std::vector<double> permutation_importance(const EnsembleModel& model, const FeatureTable& features,
                                           std::span<const int> labels, std::uint64_t seed) {
    if (!model.forest && !model.boost) throw InvalidInput("permutation importance needs a tree-based ensemble");
    if (labels.size() != features.rows || features.rows == 0) throw InvalidInput("importance inputs are misaligned");
    auto accuracy_of = [&](const FeatureTable& x) {
        double hits = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const auto p = model.forest ? model.forest->predict_proba(x.row(i)) : model.boost->predict_proba(x.row(i));
            Rng rng(row_seed(seed, i));
            if (static_cast<int>(argmax_random_tie(p, rng)) == labels[i]) hits += 1.0;
        }
        return hits / static_cast<double>(x.rows);
    };
    const double base = accuracy_of(features);
    std::vector<double> drop(features.cols);
    for (std::size_t c = 0; c < features.cols; ++c) {
        FeatureTable shuffled = features;
        std::vector<std::size_t> perm(features.rows);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(derive_seed(seed, {hash_string("permute"), c}));
        std::shuffle(perm.begin(), perm.end(), rng);
        for (std::size_t i = 0; i < features.rows; ++i)
            shuffled.values[i * features.cols + c] = features.at(perm[i], c);
        drop[c] = base - accuracy_of(shuffled);
    }
    return drop;
}

json EnsembleModel::to_json() const {
    json trail_json = json::array();
    for (const auto& s : trail)
        trail_json.push_back(json{{"learner", s.learner},
                                  {"accuracy", s.accuracy ? json(*s.accuracy) : json(nullptr)},
                                  {"included", s.included}});
    json j{{"format", "mfclass-ensemble"},
           {"version", kFormatVersion},
           {"kind", kind_name(kind)},
           {"type", mode == MeasureMode::TypeI ? "I" : "II"},
           {"classes", classes},
           {"learners", learners},
           {"covariates", covariates},
           {"params", params.to_json()},
           {"passthrough", passthrough},
           {"inner_accuracy", inner_accuracy},
           {"trail", trail_json}};
    if (!weights.empty()) j["weights"] = weights;
    if (forest) j["forest"] = forest->to_json();
    if (boost) j["boost"] = boost->to_json();
    return j;
}

EnsembleModel EnsembleModel::from_json(const json& j) {
    if (j.value("format", "") != "mfclass-ensemble") throw InvalidInput("not an ensemble document");
    if (j.value("version", 0) != kFormatVersion) throw InvalidInput("unsupported ensemble document version");
    EnsembleModel m;
    m.kind = parse_kind(j.at("kind").get<std::string>());
    m.mode = j.at("type").get<std::string>() == "I" ? MeasureMode::TypeI : MeasureMode::TypeII;
    m.classes = j.at("classes").get<std::size_t>();
    m.learners = j.at("learners").get<std::vector<std::string>>();
    m.covariates = j.at("covariates").get<std::vector<std::string>>();
    m.params = SuperParams::from_json(j.at("params"));
    m.passthrough = j.at("passthrough").get<bool>();
    m.inner_accuracy = j.at("inner_accuracy").get<double>();
    for (const auto& s : j.at("trail")) {
        TrailStep step{s.at("learner").get<std::string>(), std::nullopt, s.at("included").get<bool>()};
        if (!s.at("accuracy").is_null()) step.accuracy = s.at("accuracy").get<double>();
        m.trail.push_back(std::move(step));
    }
    if (j.contains("weights")) m.weights = j.at("weights").get<std::vector<double>>();
    if (j.contains("forest")) m.forest = ForestModel::from_json(j.at("forest"));
    if (j.contains("boost")) m.boost = BoostModel::from_json(j.at("boost"));
    return m;
}

} // namespace mfc
