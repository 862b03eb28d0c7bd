#include "mfc/cvharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "mfc/common.hpp"
#include "mfc/error.hpp"

namespace mfc {

using nlohmann::json;

namespace {

constexpr int kReportVersion = 1;

std::size_t class_count_of(std::span<const int> labels) {
    int top = -1;
    for (int y : labels) {
        if (y < 0) throw InvalidInput("class labels must be non-negative");
        top = std::max(top, y);
    }
    return static_cast<std::size_t>(top + 1);
}

// Deals `rows` (dataset indices) into `folds` groups, stratified by label.
std::vector<int> deal(const std::vector<std::size_t>& rows, std::span<const int> labels, std::size_t classes,
                      int folds, std::uint64_t seed, const std::string& what) {
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t r : rows) by_class[static_cast<std::size_t>(labels[r])].push_back(r);
    std::vector<int> fold_of(labels.size(), -1);
    std::size_t position = 0;
    for (std::size_t c = 0; c < classes; ++c) {
        auto& members = by_class[c];
        if (members.size() < static_cast<std::size_t>(folds))
            throw InvalidInput(what + ": class " + std::to_string(c + 1) + " has " + std::to_string(members.size()) +
                               " samples, stratified " + std::to_string(folds) + "-fold splitting needs at least " +
                               std::to_string(folds));
        Rng rng(derive_seed(seed, {c}));
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t r : members) fold_of[r] = static_cast<int>(position++ % static_cast<std::size_t>(folds));
    }
    return fold_of;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double brier_row(std::span<const double> p, int label) {
    double s = 0.0;
    for (std::size_t l = 0; l < p.size(); ++l) {
        const double r = (static_cast<int>(l) == label ? 1.0 : 0.0) - p[l];
        s += r * r;
    }
    return s;
}

std::string fixed(double v, int digits = 4) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

template <class F>
auto staged(const std::string& stage, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const ConfigError& e) {
        throw ConfigError(stage + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError(stage + ": " + e.what());
    } catch (const InvalidInput& e) {
        throw DataError(stage + ": " + e.what());
    } catch (const InvariantViolation& e) {
        throw InvariantViolation(stage + ": " + e.what());
    }
}

} // namespace

std::vector<std::size_t> FoldPlan::test_rows(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < outer.size(); ++i)
        if (static_cast<std::size_t>(outer[i]) == k) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::train_rows(std::size_t k) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < outer.size(); ++i)
        if (static_cast<std::size_t>(outer[i]) != k) out.push_back(i);
    return out;
}

TuningSplits FoldPlan::inner_splits(std::size_t k) const {
    TuningSplits s;
    s.rows = train_rows(k);
    s.folds = inner_folds;
    for (std::size_t r : s.rows) s.fold_of.push_back(inner[k][r]);
    return s;
}

std::string FoldPlan::serialize() const {
    std::string out = "foldplan/v1 outer=" + std::to_string(outer_folds) + " inner=" + std::to_string(inner_folds) +
                      " seed=" + std::to_string(seed) + "\n";
    for (std::size_t i = 0; i < ids.size(); ++i) {
        out += ids[i] + "," + std::to_string(outer[i]);
        for (const auto& plan : inner) out += "," + std::to_string(plan[i]);
        out += "\n";
    }
    return out;
}

std::uint64_t FoldPlan::fingerprint() const { return hash_string(serialize()); }

FoldPlan make_folds(const std::vector<std::string>& ids, std::span<const int> labels, int outer_folds,
                    int inner_folds, std::uint64_t seed) {
    if (ids.size() != labels.size()) throw InvalidInput("ids and labels differ in length");
    if (outer_folds < 2 || inner_folds < 2) throw InvalidInput("fold counts must be at least 2");
    if (ids.size() < static_cast<std::size_t>(outer_folds))
        throw InvalidInput("fewer samples than outer folds");
    const std::size_t classes = class_count_of(labels);

    FoldPlan plan;
    plan.ids = ids;
    plan.outer_folds = outer_folds;
    plan.inner_folds = inner_folds;
    plan.seed = seed;
    std::vector<std::size_t> all(ids.size());
    std::iota(all.begin(), all.end(), 0);
    plan.outer = deal(all, labels, classes, outer_folds, derive_seed(seed, {hash_string("outer")}), "outer folds");
    for (int k = 0; k < outer_folds; ++k) {
        std::vector<std::size_t> rest;
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (plan.outer[i] != k) rest.push_back(i);
        plan.inner.push_back(deal(rest, labels, classes, inner_folds,
                                  derive_seed(seed, {hash_string("inner"), static_cast<std::uint64_t>(k)}),
                                  "inner folds of outer fold " + std::to_string(k + 1)));
    }
    return plan;
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
    if (predicted.size() != truth.size()) throw InvalidInput("prediction and truth lengths differ");
    if (truth.empty()) throw InvalidInput("accuracy of an empty set is undefined");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

void TuningAudit::record(std::size_t fold, std::string stage, std::span<const std::size_t> rows) {
    std::lock_guard lock(mutex_);
    entries_.push_back(Entry{fold, std::move(stage), {rows.begin(), rows.end()}});
}

void TuningAudit::record_plan(std::string subject, std::uint64_t plan_fingerprint) {
    std::lock_guard lock(mutex_);
    plans_.emplace_back(std::move(subject), plan_fingerprint);
}

std::vector<std::string> TuningAudit::violations(const FoldPlan& plan) const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> out;
    for (const auto& e : entries_) {
        for (std::size_t r : e.rows) {
            if (r >= plan.outer.size() || static_cast<std::size_t>(plan.outer[r]) == e.fold) {
                out.push_back(e.stage + " in outer fold " + std::to_string(e.fold + 1) + " used test row " +
                              (r < plan.ids.size() ? plan.ids[r] : std::to_string(r)));
                break;
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool TuningAudit::plans_consistent() const {
    std::lock_guard lock(mutex_);
    return std::all_of(plans_.begin(), plans_.end(), [&](const auto& p) { return p.second == plans_.front().second; });
}

std::vector<TuningAudit::Entry> TuningAudit::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

std::vector<std::pair<std::string, std::uint64_t>> TuningAudit::plans() const {
    std::lock_guard lock(mutex_);
    auto out = plans_;
    std::sort(out.begin(), out.end());
    return out;
}

WeakResult evaluate_weak(const WeakLearnerSpec& base_spec, const DistanceMatrix& dist, std::span<const int> labels,
                         std::size_t class_count, const FoldPlan& plan, const WeakSettings& settings,
                         std::uint64_t seed, TuningAudit* audit) {
    if (dist.size() != labels.size() || plan.outer.size() != labels.size())
        throw InvalidInput("distance matrix, labels and fold plan cover different samples");
    WeakResult res;
    res.spec = base_spec;
    res.spec.kernel = settings.kernel;
    res.plan_fingerprint = plan.fingerprint();
    const std::string key = res.spec.key();
    const auto quantiles = settings.h_quantiles.empty() ? default_bandwidth_quantiles() : settings.h_quantiles;

    for (std::size_t k = 0; k < static_cast<std::size_t>(plan.outer_folds); ++k) {
        const TuningSplits splits = plan.inner_splits(k);
        const auto test = plan.test_rows(k);

        // k cannot exceed the smallest inner training set.
        std::vector<std::size_t> inner_size(static_cast<std::size_t>(plan.inner_folds), 0);
        for (int f : splits.fold_of) ++inner_size[static_cast<std::size_t>(f)];
        const std::size_t min_train = splits.rows.size() - *std::max_element(inner_size.begin(), inner_size.end());
        std::vector<std::size_t> k_grid;
        for (std::size_t kk : settings.k_grid.empty() ? default_k_grid(min_train) : settings.k_grid)
            if (kk <= min_train) k_grid.push_back(kk);
        if (k_grid.empty()) k_grid.push_back(1);
        std::vector<double> h_grid;
        if (base_spec.base == BaseLearner::KNCD) h_grid = bandwidth_grid(dist, splits.rows, quantiles);

        if (audit) audit->record(k, "weak tuning " + key, splits.rows);
        TuneResult tuned = tune_param(splits, res.spec, dist, labels, class_count, k_grid, h_grid,
                                      derive_seed(seed, {hash_string(key), k}));

        ProbMatrix test_probs(test.size(), class_count);
        double hits = 0.0, brier = 0.0;
        for (std::size_t t = 0; t < test.size(); ++t) {
            const auto p = predict_proba(tuned.spec, dist, splits.rows, labels, class_count, test[t]);
            std::copy(p.begin(), p.end(), test_probs.row(t).begin());
            Rng rng(derive_seed(seed, {hash_string("outer-test"), hash_string(key), test[t]}));
            if (static_cast<int>(argmax_random_tie(p, rng)) == labels[test[t]]) hits += 1.0;
            brier += brier_row(p, labels[test[t]]);
        }
        res.tuned.push_back(tuned.spec);
        res.inner_accuracy.push_back(tuned.accuracy);
        res.outer_accuracy.push_back(hits / static_cast<double>(test.size()));
        res.outer_brier.push_back(brier / static_cast<double>(test.size()));
        res.oof.push_back(std::move(tuned.oof));
        res.test.push_back(std::move(test_probs));
    }
    res.spec = res.tuned.back();
    res.mean_inner = mean_of(res.inner_accuracy);
    res.mean_outer = mean_of(res.outer_accuracy);
    res.mean_brier = mean_of(res.outer_brier);
    if (audit) audit->record_plan("weak " + key, res.plan_fingerprint);
    return res;
}

std::vector<std::size_t> select_gate(const std::vector<std::string>& names, const std::vector<double>& accuracies,
                                     double threshold) {
    if (names.size() != accuracies.size()) throw InvalidInput("gate names and accuracies differ in length");
    std::vector<std::size_t> pass;
    for (std::size_t i = 0; i < names.size(); ++i)
        if (accuracies[i] >= threshold) pass.push_back(i);
    std::stable_sort(pass.begin(), pass.end(), [&](std::size_t a, std::size_t b) {
        if (accuracies[a] != accuracies[b]) return accuracies[a] > accuracies[b];
        return names[a] < names[b];
    });
    return pass;
}

namespace {

struct EnsembleJob {
    SuperKind kind;
    MeasureMode mode;
    std::string name;
};

EnsembleJob parse_job(const std::string& s) {
    if (s == "LC") return {SuperKind::LC, MeasureMode::TypeI, s};
    if (s == "RF-I") return {SuperKind::RF, MeasureMode::TypeI, s};
    if (s == "GB-I") return {SuperKind::GB, MeasureMode::TypeI, s};
    if (s == "RF-II") return {SuperKind::RF, MeasureMode::TypeII, s};
    if (s == "GB-II") return {SuperKind::GB, MeasureMode::TypeII, s};
    throw ConfigError("unknown super-learner '" + s + "'");
}

FeatureTable measure_table(const Dataset& data, std::span<const std::size_t> rows,
                           const std::vector<std::string>& names) {
    FeatureTable t;
    t.rows = rows.size();
    t.cols = names.size();
    for (const auto& n : names) t.names.push_back("measure:" + n);
    for (std::size_t r : rows)
        for (const auto& n : names) {
            const auto v = data.samples[r].measures.get(n);
            if (!v) throw DataError("sample " + data.samples[r].key() + " has no measure '" + n + "'");
            t.values.push_back(*v);
        }
    return t;
}

EnsembleResult run_ensemble(const EnsembleJob& job, const BaseReport& base, const Dataset& data,
                            std::span<const int> labels, const FoldPlan& plan, const RunConfig& config,
                            std::size_t jobs, TuningAudit& audit) {
    EnsembleResult res;
    res.name = job.name;
    res.kind = job.kind;
    res.mode = job.mode;
    res.plan_fingerprint = plan.fingerprint();
    const auto folds = static_cast<std::size_t>(plan.outer_folds);
    const std::size_t L = data.class_count;

    std::vector<std::string> names;
    for (const auto& w : base.weak) names.push_back(w.name());

    // Candidate order per outer fold.
    std::vector<std::vector<std::size_t>> order(folds);
    for (std::size_t k = 0; k < folds; ++k) {
        if (config.ensemble.gate == GateMode::Outer) {
            order[k] = base.candidates;
        } else {
            std::vector<double> acc;
            for (const auto& w : base.weak) acc.push_back(w.inner_accuracy[k]);
            order[k] = select_gate(names, acc, config.ensemble.gate_threshold);
        }
        if (job.mode == MeasureMode::TypeII)
            std::erase_if(order[k], [&](std::size_t i) { return base.weak[i].spec.metric.is_measure(); });
        if (order[k].empty()) {
            res.skipped = true;
            res.note = job.mode == MeasureMode::TypeII ? "no curve-based weak learner passed the gate"
                                                       : "no weak learner passed the gate";
            if (config.ensemble.gate == GateMode::Inner) res.note += " in outer fold " + std::to_string(k + 1);
            return res;
        }
    }

    const auto& measure_names = config.ensemble.type2_measures;
    if (job.mode == MeasureMode::TypeII && measure_names.empty()) {
        res.skipped = true;
        res.note = "no type II measures configured";
        return res;
    }

    res.models.resize(folds);
    res.inner_accuracy.assign(folds, 0.0);
    res.outer_accuracy.assign(folds, 0.0);
    res.outer_brier.assign(folds, 0.0);
    const std::uint64_t base_tag = hash_string(base_name(base.base));
    parallel_for(folds, jobs, [&](std::size_t k) {
        const auto train = plan.train_rows(k);
        const auto test = plan.test_rows(k);
        const TuningSplits ts = plan.inner_splits(k);
        const InnerSplits splits{ts.fold_of, ts.folds};
        std::vector<int> y;
        for (std::size_t r : train) y.push_back(labels[r]);

        std::vector<std::string> cand_names;
        std::vector<const ProbMatrix*> probs;
        for (std::size_t i : order[k]) {
            cand_names.push_back(names[i]);
            probs.push_back(&base.weak[i].oof[k]);
        }
        std::optional<FeatureTable> cov_train, cov_test;
        if (job.mode == MeasureMode::TypeII) {
            cov_train = measure_table(data, train, measure_names);
            cov_test = measure_table(data, test, measure_names);
        }
        audit.record(k, "ensemble " + base_name(base.base) + " " + job.name, train);
        const std::uint64_t seed = derive_seed(config.seed, {base_tag, hash_string(job.name), k});
        EnsembleModel model = forward_select(job.kind, job.mode, cand_names, probs, cov_train ? &*cov_train : nullptr,
                                             y, L, splits, config.ensemble.grid, seed);

        std::map<std::string, std::size_t> index;
        for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
        double hits = 0.0, brier = 0.0;
        for (std::size_t t = 0; t < test.size(); ++t) {
            std::vector<std::vector<double>> p;
            for (const auto& n : model.learners) {
                const auto row = base.weak[index.at(n)].test[k].row(t);
                p.emplace_back(row.begin(), row.end());
            }
            std::span<const double> cov;
            if (cov_test) cov = cov_test->row(t);
            Rng rng(derive_seed(config.seed, {hash_string("ensemble-test"), base_tag, hash_string(job.name), test[t]}));
            const auto [prob, cls] = ensemble_predict(model, p, cov, rng);
            if (static_cast<int>(cls) == labels[test[t]]) hits += 1.0;
            brier += brier_row(prob, labels[test[t]]);
        }
        res.inner_accuracy[k] = model.inner_accuracy;
        res.outer_accuracy[k] = hits / static_cast<double>(test.size());
        res.outer_brier[k] = brier / static_cast<double>(test.size());
        res.models[k] = std::move(model);
    });
    res.mean_inner = mean_of(res.inner_accuracy);
    res.mean_outer = mean_of(res.outer_accuracy);
    res.mean_brier = mean_of(res.outer_brier);
    audit.record_plan("ensemble " + base_name(base.base) + " " + job.name, res.plan_fingerprint);
    return res;
}

} // namespace

RunReport run_pipeline(const RunConfig& config, std::size_t jobs, const ProgressFn& progress) {
    auto say = [&](const std::string& msg) {
        if (progress) progress(msg);
    };
    jobs = std::max<std::size_t>(jobs, 1);
    RunReport report;
    report.config_fingerprint = config_fingerprint(config);
    report.seed = config.seed;
    report.gate = config.ensemble.gate;
    report.gate_threshold = config.ensemble.gate_threshold;

    const auto roster = staged("config", [&] { return resolve_roster(config); });
    const auto bases = staged("config", [&] { return resolve_bases(config); });
    std::vector<EnsembleJob> ensemble_jobs;
    staged("config", [&] {
        for (const auto& s : config.ensemble.super_learners) ensemble_jobs.push_back(parse_job(s));
    });
    const WeakSettings weak_settings{config.weak.k_grid, config.weak.h_quantiles, parse_kernel(config.weak.kernel)};

    say("preprocess");
    const Dataset data = staged("preprocess", [&] { return load_dataset(config); });
    if (data.size() == 0) throw DataError("preprocess: no labeled samples");
    staged("preprocess", [&] {
        for (const auto& m : config.ensemble.type2_measures)
            for (const auto& s : data.samples)
                if (!s.measures.get(m)) throw DataError("sample " + s.key() + " has no measure '" + m + "'");
    });
    report.dataset_fingerprint = data.fingerprint();
    report.samples = data.size();
    report.classes = data.class_count;
    report.skipped_unlabeled = data.skipped_unlabeled;
    const std::vector<int> labels = data.labels();

    say("folds");
    report.plan = staged("folds", [&] {
        return make_folds(data.ids(), labels, config.outer_folds, config.inner_folds,
                          derive_seed(config.seed, {hash_string("folds")}));
    });
    const FoldPlan& plan = report.plan;

    std::vector<DistanceMatrix> matrices;
    for (const auto& spec : roster) {
        say("distances " + spec.key());
        matrices.push_back(staged("distances " + spec.key(), [&] {
            return load_or_compute(config.cache_dir(), data, spec, jobs);
        }));
    }

    TuningAudit audit;
    for (BaseLearner b : bases) {
        BaseReport br;
        br.base = b;
        br.weak.resize(roster.size());
        say("weak learners " + base_name(b));
        staged("weak learners " + base_name(b), [&] {
            parallel_for(roster.size(), jobs, [&](std::size_t i) {
                WeakLearnerSpec spec;
                spec.base = b;
                spec.metric = roster[i];
                br.weak[i] = evaluate_weak(spec, matrices[i], labels, data.class_count, plan, weak_settings,
                                           config.seed, &audit);
            });
        });
        std::vector<std::string> names;
        std::vector<double> acc;
        for (const auto& w : br.weak) {
            names.push_back(w.name());
            acc.push_back(w.mean_outer);
        }
        br.candidates = select_gate(names, acc, config.ensemble.gate_threshold);
        for (const auto& job : ensemble_jobs) {
            say("ensemble " + base_name(b) + " " + job.name);
            br.ensembles.push_back(staged("ensemble " + base_name(b) + " " + job.name, [&] {
                return run_ensemble(job, br, data, labels, plan, config, jobs, audit);
            }));
        }
        report.bases.push_back(std::move(br));
    }

    report.audit_violations = audit.violations(plan);
    report.plans_consistent = audit.plans_consistent();
    report.audit_entries = audit.entries().size();
    if (!report.plans_consistent) throw InvariantViolation("audit: learners consumed different fold plans");
    if (!report.audit_violations.empty())
        throw InvariantViolation("audit: " + report.audit_violations.front());
    return report;
}

json RunReport::to_json() const {
    json j;
    j["format"] = "mfclass-report";
    j["version"] = kReportVersion;
    j["config_fingerprint"] = to_hex(config_fingerprint);
    j["dataset_fingerprint"] = to_hex(dataset_fingerprint);
    j["seed"] = seed;
    j["samples"] = samples;
    j["classes"] = classes;
    j["skipped_unlabeled"] = skipped_unlabeled;
    j["folds"] = {{"outer", plan.outer_folds}, {"inner", plan.inner_folds}, {"fingerprint", to_hex(plan.fingerprint())}};
    j["gate"] = {{"mode", gate == GateMode::Outer ? "outer" : "inner"},
                 {"threshold", gate_threshold},
                 {"note", gate == GateMode::Outer
                              ? "candidates are gated on mean outer accuracy; this couples the outer test folds to "
                                "ensemble composition"
                              : "candidates are gated per outer fold on inner accuracy"}};

    json bases_json = json::array();
    for (const auto& b : bases) {
        json weak = json::array();
        std::set<std::size_t> passed(b.candidates.begin(), b.candidates.end());
        for (std::size_t i = 0; i < b.weak.size(); ++i) {
            const auto& w = b.weak[i];
            json params = json::array();
            for (const auto& t : w.tuned) {
                if (t.base == BaseLearner::FkNN) params.push_back(json{{"k", t.k}});
                else params.push_back(json{{"h", t.h}});
            }
            weak.push_back(json{{"name", w.name()},
                                {"semimetric", w.spec.metric.name},
                                {"a", w.spec.metric.order},
                                {"family", family_name(w.spec.metric.family())},
                                {"params", params},
                                {"inner_accuracy", w.inner_accuracy},
                                {"outer_accuracy", w.outer_accuracy},
                                {"outer_brier", w.outer_brier},
                                {"mean_inner", w.mean_inner},
                                {"mean_outer", w.mean_outer},
                                {"mean_brier", w.mean_brier},
                                {"passed_gate", passed.count(i) > 0},
                                {"plan_fingerprint", to_hex(w.plan_fingerprint)}});
        }
        json cands = json::array();
        for (std::size_t i : b.candidates) cands.push_back(b.weak[i].name());

        json ens = json::array();
        for (const auto& e : b.ensembles) {
            json je{{"name", e.name}, {"skipped", e.skipped}};
            if (e.skipped) {
                je["note"] = e.note;
                ens.push_back(je);
                continue;
            }
            json folds_json = json::array();
            for (std::size_t k = 0; k < e.models.size(); ++k) {
                const auto& m = e.models[k];
                json trail = json::array();
                for (const auto& s : m.trail)
                    trail.push_back(json{{"learner", s.learner},
                                         {"accuracy", s.accuracy ? json(*s.accuracy) : json(nullptr)},
                                         {"included", s.included}});
                json jf{{"selected", m.learners},
                        {"trail", trail},
                        {"params", m.params.to_json()},
                        {"passthrough", m.passthrough},
                        {"inner_accuracy", e.inner_accuracy[k]},
                        {"outer_accuracy", e.outer_accuracy[k]},
                        {"outer_brier", e.outer_brier[k]}};
                if (!m.weights.empty()) jf["weights"] = m.weights;
                folds_json.push_back(jf);
            }
            je["folds"] = folds_json;
            je["mean_inner"] = e.mean_inner;
            je["mean_outer"] = e.mean_outer;
            je["mean_brier"] = e.mean_brier;
            je["plan_fingerprint"] = to_hex(e.plan_fingerprint);
            ens.push_back(je);
        }
        json jb{{"base", base_name(b.base)}, {"weak_learners", weak}, {"candidates", cands}, {"ensembles", ens}};
        if (b.candidates.empty()) jb["note"] = "no weak learner passed the gate; ensembles skipped";
        bases_json.push_back(jb);
    }
    j["bases"] = bases_json;
    j["audit"] = {{"plans_consistent", plans_consistent},
                  {"tuning_records", audit_entries},
                  {"violations", audit_violations},
                  {"exception", "the accuracy gate (mode outer) reads outer-fold accuracies by design"}};
    return j;
}

std::string RunReport::weak_table_csv() const {
    std::string out = "base,semimetric,a,family,mean_inner,mean_outer,mean_brier,passed_gate\n";
    for (const auto& b : bases) {
        std::set<std::size_t> passed(b.candidates.begin(), b.candidates.end());
        for (std::size_t i = 0; i < b.weak.size(); ++i) {
            const auto& w = b.weak[i];
            out += base_name(b.base) + "," + w.spec.metric.name + "," + std::to_string(w.spec.metric.order) + "," +
                   family_name(w.spec.metric.family()) + "," + fixed(w.mean_inner) + "," + fixed(w.mean_outer) + "," +
                   fixed(w.mean_brier) + "," + (passed.count(i) ? "yes" : "no") + "\n";
        }
    }
    return out;
}

std::string RunReport::ensemble_table_csv(std::size_t base_index) const {
    const auto& b = bases.at(base_index);
    const std::vector<std::string> columns{"RF-I", "GB-I", "RF-II", "GB-II", "LC"};
    std::vector<const EnsembleResult*> ens(columns.size(), nullptr);
    for (std::size_t c = 0; c < columns.size(); ++c)
        for (const auto& e : b.ensembles)
            if (e.name == columns[c]) ens[c] = &e;

    std::string out = "semimetric,weak_inner";
    for (const auto& c : columns) out += "," + c + (c == "LC" ? "_weight," : "_accuracy,") + c + "_included";
    out += "\n";
    for (std::size_t i : b.candidates) {
        const std::string name = b.weak[i].name();
        out += name + "," + fixed(b.weak[i].mean_inner);
        for (std::size_t c = 0; c < columns.size(); ++c) {
            const auto* e = ens[c];
            if (!e || e->skipped) {
                out += ",,";
                continue;
            }
            double sum = 0.0;
            std::size_t seen = 0, included = 0;
            for (const auto& m : e->models) {
                const auto pos = std::find(m.learners.begin(), m.learners.end(), name);
                if (pos != m.learners.end()) ++included;
                if (columns[c] == "LC") {
                    sum += pos != m.learners.end() ? m.weights[static_cast<std::size_t>(pos - m.learners.begin())] : 0.0;
                    ++seen;
                    continue;
                }
                for (const auto& s : m.trail)
                    if (s.learner == name && s.accuracy) {
                        sum += *s.accuracy;
                        ++seen;
                    }
            }
            out += "," + (seen ? fixed(sum / static_cast<double>(seen)) : std::string()) + "," + std::to_string(included);
        }
        out += "\n";
    }
    for (const char* row : {"inner_accuracy", "outer_accuracy"}) {
        out += std::string(row) + ",";
        for (const auto* e : ens) {
            if (!e || e->skipped) {
                out += ",,";
                continue;
            }
            out += "," + fixed(std::string(row) == "inner_accuracy" ? e->mean_inner : e->mean_outer) + ",";
        }
        out += "\n";
    }
    return out;
}

void write_report(const std::filesystem::path& dir, const RunReport& report, bool save_models) {
    std::filesystem::create_directories(dir);
    auto write = [&](const std::filesystem::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary);
        if (!out) throw DataError("cannot write " + p.string());
        out << text;
    };
    write(dir / "report.json", report.to_json().dump(2) + "\n");
    write(dir / "weak_learners.csv", report.weak_table_csv());
    for (std::size_t b = 0; b < report.bases.size(); ++b)
        write(dir / ("ensembles_" + base_name(report.bases[b].base) + ".csv"), report.ensemble_table_csv(b));
    if (!save_models) return;
    std::filesystem::create_directories(dir / "models");
    for (const auto& b : report.bases)
        for (const auto& e : b.ensembles)
            for (std::size_t k = 0; k < e.models.size(); ++k)
                write(dir / "models" / (base_name(b.base) + "_" + e.name + "_fold" + std::to_string(k + 1) + ".json"),
                      e.models[k].to_json().dump() + "\n");
}

} // namespace mfc
