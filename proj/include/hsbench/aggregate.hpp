#pragma once

/**
 * @file aggregate.hpp
 *
 * @brief Hierarchical PAS aggregation (test -> finding -> study -> benchmark),
 * the four-level global validity test, participant bootstrap standard errors and
 * prior-sensitivity summaries.
 */

#include "core.hpp"
#include "dist.hpp"
#include "evidence.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace hsbench {

inline constexpr double kFisherClamp = 1e-6;
inline constexpr double kValidityClamp = 1e-12;
inline constexpr int kDefaultBootstrapReplicates = 200;

/**
 * Combines scores in [0, 1] on the Fisher-z scale: r = 2S - 1 (clamped to
 * [-1 + eps, 1 - eps]), weighted mean of atanh r, mapped back with (tanh + 1) / 2.
 * An empty `weights` span means equal weights.
 */
inline double fisher_combine(std::span<const double> scores, std::span<const double> weights = {}, double eps = kFisherClamp) {
    if (scores.empty()) throw Error(ErrorCode::empty_input, "nothing to combine");
    if (!weights.empty() && weights.size() != scores.size()) throw Error(ErrorCode::length_mismatch, "one weight per score");
    if (!(eps > 0 && eps <= 0.01)) throw Error(ErrorCode::domain_error, "clamp epsilon must lie in (0, 0.01]");
    double zsum = 0, wsum = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i];
        if (!(s >= 0 && s <= 1)) throw Error(ErrorCode::domain_error, "score outside [0, 1]");
        const double w = weights.empty() ? 1.0 : weights[i];
        if (!(w > 0)) throw Error(ErrorCode::domain_error, "weights must be positive");
        const double r = std::clamp(2 * s - 1, -1 + eps, 1 - eps);
        zsum += w * std::atanh(r);
        wsum += w;
    }
    const double r_bar = std::tanh(zsum / wsum);
    return (r_bar + 1) / 2;
}

struct TestLeaf {
    std::string id;
    double score = 0.5;
    double weight = 1;
};

struct FindingNode {
    std::string id;
    double weight = 1;
    std::vector<TestLeaf> tests;
    std::optional<double> score;
};

struct StudyNode {
    std::string id;
    std::string domain;
    std::vector<FindingNode> findings;
    std::optional<double> score;
};

struct ScoreTree {
    std::vector<StudyNode> studies;
    std::optional<double> benchmark;
};

/**
 * Fills finding, study and benchmark scores. Findings without tests and studies
 * without scored findings stay empty; the benchmark is the plain mean of scored
 * studies. Throws EmptyInput when no study can be scored.
 */
inline ScoreTree benchmark_pas(ScoreTree tree, double eps = kFisherClamp) {
    double sum = 0;
    int scored = 0;
    for (auto& study : tree.studies) {
        std::vector<double> fs, fw;
        for (auto& finding : study.findings) {
            finding.score.reset();
            if (finding.tests.empty()) continue;
            std::vector<double> s, w;
            for (const auto& t : finding.tests) {
                s.push_back(t.score);
                w.push_back(t.weight);
            }
            finding.score = fisher_combine(s, w, eps);
            fs.push_back(*finding.score);
            fw.push_back(finding.weight);
        }
        study.score.reset();
        if (fs.empty()) continue;
        study.score = fisher_combine(fs, fw, eps);
        sum += *study.score;
        ++scored;
    }
    if (scored == 0) throw Error(ErrorCode::empty_input, "no study has a scored test");
    tree.benchmark = sum / scored;
    return tree;
}

// ---------------------------------------------------------------- global validity

struct DiffTest {
    double d_agent = 0;
    double se_agent = 0;
    double d_human = 0;
    double se_human = 0;
};

struct ValidityFinding {
    std::string id;
    std::vector<DiffTest> tests;
};

struct ValidityStudy {
    std::string id;
    std::vector<ValidityFinding> findings;
};

struct FindingValidity {
    std::string id;
    std::vector<double> z;
    double chi2 = 0;
    int df = 0;
    double p = 1;
    double z_star = 0;
};

struct StudyValidity {
    std::string id;
    std::vector<FindingValidity> findings;
    double z_study = 0;
};

struct GlobalValidity {
    std::optional<double> p_global;
    double z_benchmark = 0;
    std::vector<StudyValidity> studies;
    std::vector<std::string> skipped_findings;
};

inline double standardized_difference(const DiffTest& t) {
    const double se = std::sqrt(t.se_agent * t.se_agent + t.se_human * t.se_human);
    if (!std::isfinite(se) || !(se > 0)) throw Error(ErrorCode::domain_error, "standardized difference needs positive finite SEs");
    return (t.d_agent - t.d_human) / se;
}

/**
 * Level 1 standardized differences, Level 2 per-finding chi-square over K tests,
 * Level 3 Stouffer combination within each study, Level 4 across studies.
 * Findings with no tests are skipped and listed; `p_global` is empty when nothing remains.
 */
inline GlobalValidity global_validity(std::span<const ValidityStudy> studies, double eps = kValidityClamp) {
    GlobalValidity out;
    double z_sum = 0;
    int s_count = 0;
    for (const auto& study : studies) {
        StudyValidity sv;
        sv.id = study.id;
        double zs = 0;
        for (const auto& f : study.findings) {
            if (f.tests.empty()) {
                out.skipped_findings.push_back(study.id + "/" + f.id);
                continue;
            }
            FindingValidity fv;
            fv.id = f.id;
            for (const auto& t : f.tests) {
                const double z = standardized_difference(t);
                fv.z.push_back(z);
                fv.chi2 += z * z;
            }
            fv.df = static_cast<int>(f.tests.size());
            fv.p = std::clamp(dist::sf(dist::chi_squared(fv.df), fv.chi2), eps, 1 - eps);
            fv.z_star = dist::normal_quantile(1 - fv.p);
            zs += fv.z_star;
            sv.findings.push_back(std::move(fv));
        }
        if (sv.findings.empty()) continue;
        sv.z_study = zs / std::sqrt(static_cast<double>(sv.findings.size()));
        z_sum += sv.z_study;
        ++s_count;
        out.studies.push_back(std::move(sv));
    }
    if (s_count > 0) {
        out.z_benchmark = z_sum / std::sqrt(static_cast<double>(s_count));
        out.p_global = dist::normal_sf(out.z_benchmark);
    }
    return out;
}

// ---------------------------------------------------------------- bootstrap

struct BootstrapResult {
    int replicates = 0;
    std::uint64_t seed = 0;
    std::vector<double> study_se;
    /// Replicates per study whose score was undefined and therefore dropped.
    std::vector<int> dropped;
    double total_se = 0;
};

namespace aggregate_detail {

/// Per-(study, replicate) generator so the draw sequence does not depend on scheduling.
inline std::mt19937_64 replicate_engine(std::uint64_t seed, std::size_t study, std::size_t replicate) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), static_cast<std::uint32_t>(study),
                      static_cast<std::uint32_t>(replicate), 0x68736230u};
    return std::mt19937_64(seq);
}

/// Unbiased integer in [0, n) by rejection; spelled out so results match across standard libraries.
inline std::size_t uniform_index(std::mt19937_64& eng, std::size_t n) {
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
        x = eng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

inline double sample_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0;
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

} // namespace aggregate_detail

/// Propagated SE of a mean over K study scores.
inline double propagate_se(std::span<const double> study_se) {
    if (study_se.empty()) return 0;
    double ss = 0;
    for (double s : study_se) ss += s * s;
    return std::sqrt(ss) / static_cast<double>(study_se.size());
}

/**
 * Participant bootstrap. For each study k with `participants[k]` participants,
 * draws B resamples of the same size with replacement and calls
 * `scorer(k, indices)`; the study SE is the sample SD of the finite replicate
 * scores. Bit-identical for a given (seed, B) at any `jobs`.
 */
template <class Scorer>
BootstrapResult bootstrap_se(std::span<const std::size_t> participants, Scorer&& scorer, int replicates, std::uint64_t seed, unsigned jobs = 1) {
    if (replicates < 2) throw Error(ErrorCode::domain_error, "bootstrap needs B >= 2");
    for (std::size_t n : participants) {
        if (n < 2) throw Error(ErrorCode::too_few_participants, "bootstrap needs at least 2 participants per study");
    }
    BootstrapResult out;
    out.replicates = replicates;
    out.seed = seed;
    const std::size_t per = static_cast<std::size_t>(replicates);
    const std::size_t total = participants.size() * per;
    auto scores = parallel_map(total, jobs, [&](std::size_t job) {
        const std::size_t k = job / per, b = job % per;
        auto eng = aggregate_detail::replicate_engine(seed, k, b);
        std::vector<std::size_t> idx(participants[k]);
        for (auto& i : idx) i = aggregate_detail::uniform_index(eng, participants[k]);
        return static_cast<double>(scorer(k, idx));
    });
    for (std::size_t k = 0; k < participants.size(); ++k) {
        std::vector<double> finite;
        int dropped = 0;
        for (std::size_t b = 0; b < per; ++b) {
            const double s = scores[k * per + b];
            if (std::isfinite(s)) finite.push_back(s);
            else ++dropped;
        }
        out.study_se.push_back(aggregate_detail::sample_sd(finite));
        out.dropped.push_back(dropped);
    }
    out.total_se = propagate_se(out.study_se);
    return out;
}

// ---------------------------------------------------------------- sensitivity

/// Average ranks (1-based), ties share the mean rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = (static_cast<double>(i + j) / 2) + 1;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

/// Spearman correlation; NaN when either side has no rank variation.
inline double spearman(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::length_mismatch, "spearman needs equal lengths");
    const auto ra = average_ranks(a), rb = average_ranks(b);
    const double n = static_cast<double>(a.size());
    const double m = (n + 1) / 2;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - m) * (rb[i] - m);
        saa += (ra[i] - m) * (ra[i] - m);
        sbb += (rb[i] - m) * (rb[i] - m);
    }
    if (saa == 0 || sbb == 0) return std::numeric_limits<double>::quiet_NaN();
    return sab / std::sqrt(saa * sbb);
}

struct SensitivityRow {
    double r = 0;
    double spearman_rho = 0;
    double mean_delta_pas = 0;
    double max_delta_pas = 0;
};

struct SensitivityReport {
    double baseline = kDefaultScaleT;
    std::vector<SensitivityRow> rows;
    bool degenerate_ranking = false;
};

/**
 * Summarizes benchmark PAS per grid scale. `pas[i][j]` is agent j's PAS at
 * `grid[i]`; the baseline row is the grid entry nearest `baseline` (within 5e-4).
 */
inline SensitivityReport sensitivity_report(std::span<const double> grid, const std::vector<std::vector<double>>& pas,
                                            double baseline = kDefaultScaleT) {
    if (grid.size() != pas.size()) throw Error(ErrorCode::length_mismatch, "one PAS row per grid scale");
    std::size_t base = grid.size();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (std::abs(grid[i] - baseline) <= 5e-4 && (base == grid.size() || std::abs(grid[i] - baseline) < std::abs(grid[base] - baseline))) base = i;
    }
    if (base == grid.size()) throw Error(ErrorCode::domain_error, "grid must include the baseline scale");
    SensitivityReport rep;
    rep.baseline = grid[base];
    const auto& ref = pas[base];
    const std::size_t agents = ref.size();
    for (const auto& row : pas) {
        if (row.size() != agents) throw Error(ErrorCode::length_mismatch, "every grid row needs one PAS per agent");
    }
    const bool all_tied = std::all_of(ref.begin(), ref.end(), [&](double x) { return x == ref.front(); });
    rep.degenerate_ranking = agents < 2 || all_tied;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SensitivityRow row;
        row.r = grid[i];
        row.spearman_rho = rep.degenerate_ranking ? std::numeric_limits<double>::quiet_NaN() : spearman(pas[i], ref);
        double sum = 0, mx = 0;
        for (std::size_t j = 0; j < agents; ++j) {
            const double d = std::abs(pas[i][j] - ref[j]);
            sum += d;
            mx = std::max(mx, d);
        }
        row.mean_delta_pas = agents ? sum / static_cast<double>(agents) : 0;
        row.max_delta_pas = mx;
        rep.rows.push_back(row);
    }
    return rep;
}

} // namespace hsbench
