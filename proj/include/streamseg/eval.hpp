#pragma once

// Segmentation evaluation against synthetic truth.
//
// Matching is by majority point overlap on the scan grid. For a truth object
// T let S(T) be the predictions that cover at least half of T's points and
// F(T) the predictions at least half of whose own points lie in T. Then
//   - T is a true positive iff S(T) has exactly one member and that member
//     is also in F(T);
//   - otherwise T is under-segmented if some prediction in S(T) also
//     majority-covers a different truth object;
//   - otherwise T is over-segmented if F(T) has at least two members;
//   - otherwise T is missed.
// Predictions with no majority truth are false positives. Truth objects are
// gated by centroid range; predictions that majority-match a gated-out
// object are ignored rather than counted as false positives.

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "streamseg/cluster.hpp"
#include "streamseg/synth.hpp"

namespace streamseg {

struct EvalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A predicted point that does not map onto the truth grid (or is claimed
// twice) means the prediction and truth do not describe the same scan.
struct IndexMismatch : EvalError {
    using EvalError::EvalError;
};

enum class MatchOutcome : uint8_t {
    TruePositive,
    OverSegmented,
    UnderSegmented,
    Missed,
};

inline const char* to_string(MatchOutcome m) {
    switch (m) {
        case MatchOutcome::TruePositive: return "tp";
        case MatchOutcome::OverSegmented: return "over";
        case MatchOutcome::UnderSegmented: return "under";
        case MatchOutcome::Missed: return "missed";
    }
    return "?";
}

struct ObjectMatch {
    int truth_id = 0;
    int truth_points = 0;
    MatchOutcome outcome = MatchOutcome::Missed;
};

struct EvalOptions {
    double range_gate = 30.0;  // m, on truth centroid horizontal range
    int min_truth_points = 1;  // truths with fewer visible points are skipped
};

struct SegMetrics {
    // Counts.
    int truths = 0;  // evaluated truth objects (after gating)
    int tp = 0, fn = 0, over = 0, under = 0;
    int fp = 0;
    int predictions = 0;  // evaluated predictions (after gating)

    // Rates; nullopt where no truth was evaluated at all.
    std::optional<double> tpr, fnr, osr, usr, precision, recall;

    std::vector<ObjectMatch> matches;

    SegMetrics& operator+=(const SegMetrics& o) {
        truths += o.truths;
        tp += o.tp;
        fn += o.fn;
        over += o.over;
        under += o.under;
        fp += o.fp;
        predictions += o.predictions;
        matches.insert(matches.end(), o.matches.begin(), o.matches.end());
        finalize();
        return *this;
    }

    // Ratio conventions, pinned: x/0 with the numerator necessarily zero is
    // a vacuous success (1.0); tpr/fnr are undefined without truths.
    void finalize() {
        auto ratio = [](int num, int den) -> std::optional<double> {
            if (den == 0) return 1.0;
            return static_cast<double>(num) / den;
        };
        if (truths == 0) {
            tpr.reset();
            fnr.reset();
        } else {
            tpr = static_cast<double>(tp) / truths;
            fnr = static_cast<double>(fn) / truths;
        }
        osr = ratio(tp, tp + over);
        usr = ratio(tp, tp + under);
        precision = ratio(tp, tp + fp);
        recall = ratio(tp, tp + fn);
    }
};

inline void to_json(nlohmann::json& j, const SegMetrics& m) {
    j = nlohmann::json{{"truths", m.truths}, {"tp", m.tp},
                       {"fn", m.fn},         {"over", m.over},
                       {"under", m.under},   {"fp", m.fp},
                       {"predictions", m.predictions}};
    auto put = [&](const char* k, const std::optional<double>& v) {
        if (v) j[k] = *v;
        else j[k] = nullptr;
    };
    put("tpr", m.tpr);
    put("fnr", m.fnr);
    put("osr", m.osr);
    put("usr", m.usr);
    put("precision", m.precision);
    put("recall", m.recall);
}

inline std::string metrics_csv_header() {
    return "scene,truths,tp,fn,over,under,fp,predictions,"
           "tpr,fnr,osr,usr,precision,recall";
}

inline std::string metrics_csv_row(const std::string& scene,
                                   const SegMetrics& m) {
    auto cell = [](const std::optional<double>& v) {
        if (!v) return std::string("n/a");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6f", *v);
        return std::string(buf);
    };
    std::string r = scene;
    for (int c : {m.truths, m.tp, m.fn, m.over, m.under, m.fp, m.predictions})
        r += "," + std::to_string(c);
    for (const auto& v : {m.tpr, m.fnr, m.osr, m.usr, m.precision, m.recall})
        r += "," + cell(v);
    return r;
}

// --------------------------------------------------------------------------
// Matching.

inline SegMetrics evaluate_scan(const LabeledScan& truth,
                                const std::vector<InitialCluster>& preds,
                                const EvalOptions& opt = {}) {
    const size_t grid = truth.pts.size();

    // Truth point counts and gating.
    std::map<int, int> truth_points;
    for (int32_t t : truth.truth)
        if (t >= 0) ++truth_points[t];
    std::map<int, bool> gated_out;  // id -> excluded by range gate
    for (const auto& o : truth.objects)
        gated_out[o.id] = o.centroid_rho_xy() > opt.range_gate;

    // Per-prediction truth overlap.
    struct PredInfo {
        int size = 0;
        std::map<int, int> overlap;  // truth id (>=0 only) -> shared points
        int majority = -1;           // truth id covering >= half of us
        bool ignored = false;
    };
    std::vector<PredInfo> info(preds.size());
    std::vector<uint8_t> claimed(grid, 0);
    for (size_t i = 0; i < preds.size(); ++i) {
        PredInfo& pi = info[i];
        pi.size = static_cast<int>(preds[i].points.size());
        for (const auto& p : preds[i].points) {
            if (p.row < 0 || p.row >= truth.rows || p.col < 0 ||
                p.col >= truth.cols)
                throw IndexMismatch("predicted point off the truth grid");
            const size_t cell =
                static_cast<size_t>(p.col) * truth.rows + p.row;
            if (claimed[cell])
                throw IndexMismatch("point claimed by two predictions");
            claimed[cell] = 1;
            const int32_t t = truth.truth[cell];
            if (t >= 0) ++pi.overlap[t];
        }
        for (const auto& [tid, n] : pi.overlap)
            if (2 * n >= pi.size) pi.majority = tid;
        if (pi.majority >= 0 && gated_out[pi.majority]) pi.ignored = true;
    }

    // S and F sets per evaluated truth.
    SegMetrics m;
    std::map<int, std::vector<size_t>> covers;  // truth id -> S(T)
    std::map<int, std::vector<size_t>> frags;   // truth id -> F(T)
    std::vector<int> eval_ids;
    for (const auto& [tid, npts] : truth_points) {
        if (gated_out[tid] || npts < opt.min_truth_points) continue;
        eval_ids.push_back(tid);
        for (size_t i = 0; i < preds.size(); ++i) {
            if (info[i].ignored) continue;
            auto it = info[i].overlap.find(tid);
            const int shared = it == info[i].overlap.end() ? 0 : it->second;
            if (shared == 0) continue;
            if (2 * shared >= npts) covers[tid].push_back(i);
            if (2 * shared >= info[i].size) frags[tid].push_back(i);
        }
    }

    for (int tid : eval_ids) {
        ObjectMatch om;
        om.truth_id = tid;
        om.truth_points = truth_points[tid];
        const auto& S = covers[tid];
        const auto& F = frags[tid];
        const bool tp_match =
            S.size() == 1 &&
            std::find(F.begin(), F.end(), S.front()) != F.end();
        bool shared_cover = false;
        for (size_t i : S) {
            for (const auto& [tid2, S2] : covers)
                if (tid2 != tid &&
                    std::find(S2.begin(), S2.end(), i) != S2.end())
                    shared_cover = true;
        }
        if (tp_match) {
            om.outcome = MatchOutcome::TruePositive;
            ++m.tp;
        } else if (shared_cover) {
            om.outcome = MatchOutcome::UnderSegmented;
            ++m.under;
        } else if (F.size() >= 2) {
            om.outcome = MatchOutcome::OverSegmented;
            ++m.over;
        } else {
            om.outcome = MatchOutcome::Missed;
            ++m.fn;
        }
        m.matches.push_back(om);
    }

    m.truths = static_cast<int>(eval_ids.size());
    for (const auto& pi : info) {
        if (pi.ignored) continue;
        ++m.predictions;
        if (pi.majority < 0) ++m.fp;
    }
    m.finalize();
    return m;
}

// --------------------------------------------------------------------------
// Brute-force single-linkage oracle: clusters points so that two points end
// up together iff a chain of hops, each at most link_dist, connects them.

namespace detail {

struct UnionFind {
    std::vector<int> parent, size;
    explicit UnionFind(int n) : parent(n), size(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int a) {
        while (parent[a] != a) a = parent[a] = parent[parent[a]];
        return a;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
    }
};

}  // namespace detail

inline std::vector<std::vector<SphericalPoint>> oracle_cluster(
    const std::vector<SphericalPoint>& pts, double link_dist) {
    const int n = static_cast<int>(pts.size());
    detail::UnionFind uf(n);
    const double d2 = link_dist * link_dist;
    for (int i = 0; i < n; ++i) {
        for (int k = i + 1; k < n; ++k) {
            const double dx = pts[i].x - pts[k].x;
            const double dy = pts[i].y - pts[k].y;
            const double dz = pts[i].z - pts[k].z;
            if (dx * dx + dy * dy + dz * dz <= d2) uf.unite(i, k);
        }
    }
    std::map<int, std::vector<SphericalPoint>> groups;
    for (int i = 0; i < n; ++i) groups[uf.find(i)].push_back(pts[i]);
    std::vector<std::vector<SphericalPoint>> out;
    out.reserve(groups.size());
    for (auto& [root, g] : groups) out.push_back(std::move(g));
    return out;
}

}  // namespace streamseg
