#pragma once

// Streaming connected-component clustering of Obstacle points plus the
// linkage-based refinement that repairs over-segmentation.
//
// CCL walks columns in sweep order, each column bottom to top; a point joins
// the first cluster owning a point whose horizontal range differs by less
// than t_ccl inside its search region (previous 5 or 10 columns depending on
// range, plus already-processed points of its own column). Refinement scores
// azimuth-linked cluster pairs by the mutual_n-th smallest cartesian pair
// distance between their facing parts and merges below t_merge.

#include <deque>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "streamseg/geometry.hpp"
#include "streamseg/packet.hpp"

namespace streamseg {

enum class Linkage { None, Contain, Overlap, Neighbour };

inline const char* to_string(Linkage l) {
    switch (l) {
        case Linkage::None: return "none";
        case Linkage::Contain: return "contain";
        case Linkage::Overlap: return "overlap";
        case Linkage::Neighbour: return "neighbour";
    }
    return "?";
}

struct ColSpan {
    int start = 0;
    int end = 0;  // inclusive
};

// Relation between two azimuth spans. Precedence: Contain > Overlap >
// Neighbour. The gap between disjoint spans counts the columns strictly
// between them.
inline Linkage linkage(ColSpan a, ColSpan b, int t_neighbour) {
    const bool a_in_b = a.start >= b.start && a.end <= b.end;
    const bool b_in_a = b.start >= a.start && b.end <= a.end;
    if (a_in_b || b_in_a) return Linkage::Contain;
    if (a.start <= b.end && b.start <= a.end) return Linkage::Overlap;
    const ColSpan& lo = a.start <= b.start ? a : b;
    const ColSpan& hi = a.start <= b.start ? b : a;
    const int gap = hi.start - lo.end - 1;
    if (gap < t_neighbour) return Linkage::Neighbour;
    return Linkage::None;
}

struct InitialCluster {
    uint32_t id = 0;
    std::vector<SphericalPoint> points;
    int col_start = 0;
    int col_end = 0;
    // Axis-aligned bounds over the points, maintained by the clusterer.
    double min_x = std::numeric_limits<double>::infinity();
    double max_x = -std::numeric_limits<double>::infinity();
    double min_y = std::numeric_limits<double>::infinity();
    double max_y = -std::numeric_limits<double>::infinity();
    double min_z = std::numeric_limits<double>::infinity();
    double max_z = -std::numeric_limits<double>::infinity();

    ColSpan span() const { return {col_start, col_end}; }
    int width() const { return col_end - col_start + 1; }

    void expand(const SphericalPoint& p) {
        min_x = std::min(min_x, p.x);
        max_x = std::max(max_x, p.x);
        min_y = std::min(min_y, p.y);
        max_y = std::max(max_y, p.y);
        min_z = std::min(min_z, p.z);
        max_z = std::max(max_z, p.z);
    }
};

// True when the clusters' bounding boxes are at least t apart. The box gap
// lower-bounds every point-pair distance, hence also the mutual-n-th one
// cluster_distance would return, so such a pair can be scored as a non-merge
// without scanning point pairs.
inline bool boxes_apart(const InitialCluster& a, const InitialCluster& b,
                        double t) {
    auto axis = [](double amin, double amax, double bmin, double bmax) {
        return std::max({0.0, bmin - amax, amin - bmax});
    };
    const double gx = axis(a.min_x, a.max_x, b.min_x, b.max_x);
    const double gy = axis(a.min_y, a.max_y, b.min_y, b.max_y);
    const double gz = axis(a.min_z, a.max_z, b.min_z, b.max_z);
    return gx * gx + gy * gy + gz * gz >= t * t;
}

namespace detail {

// n-th smallest value seen so far, streamed through a bounded max-heap.
struct NthSmallest {
    explicit NthSmallest(int n) : n_(static_cast<size_t>(n)) {}
    void add(double v) {
        if (heap_.size() < n_) {
            heap_.push(v);
        } else if (v < heap_.top()) {
            heap_.pop();
            heap_.push(v);
        }
    }
    bool empty() const { return heap_.empty(); }
    // n-th smallest, or the largest available when fewer than n were added.
    double value() const { return heap_.top(); }

  private:
    size_t n_;
    std::priority_queue<double> heap_;
};

}  // namespace detail

// Mutual-region distance between two linked clusters: the mutual_n-th
// smallest cartesian distance over point pairs drawn from the parts of each
// cluster facing the other (the span overlap for Contain/Overlap, the
// t_neighbour columns flanking the gap for Neighbour). The overlap region is
// widened by the same t_neighbour flank: a fragment split off by a return
// dropout sits in a hole of its parent's span, and the parent's nearest
// points can lie just outside that hole — a strict overlap cut would leave
// the region empty and make such pairs unmergeable. +inf when either region
// is empty or the clusters are unlinked. shift2 virtually displaces c2's
// columns (used for the 0/360 seam check at end of scan).
inline double cluster_distance(const InitialCluster& c1,
                               const InitialCluster& c2,
                               const SegParams& params, int shift2 = 0) {
    const ColSpan s1 = c1.span();
    const ColSpan s2{c2.col_start + shift2, c2.col_end + shift2};
    const Linkage rel = linkage(s1, s2, params.t_neighbour);
    if (rel == Linkage::None) return std::numeric_limits<double>::infinity();

    int lo1, hi1, lo2, hi2;
    if (rel == Linkage::Neighbour) {
        const bool c1_first = s1.start <= s2.start;
        if (c1_first) {
            lo1 = s1.end - params.t_neighbour;
            hi1 = s1.end;
            lo2 = s2.start;
            hi2 = s2.start + params.t_neighbour;
        } else {
            lo1 = s1.start;
            hi1 = s1.start + params.t_neighbour;
            lo2 = s2.end - params.t_neighbour;
            hi2 = s2.end;
        }
    } else {
        lo1 = lo2 = std::max(s1.start, s2.start) - params.t_neighbour;
        hi1 = hi2 = std::min(s1.end, s2.end) + params.t_neighbour;
    }
    lo2 -= shift2;
    hi2 -= shift2;

    std::vector<const SphericalPoint*> r1, r2;
    for (const auto& p : c1.points)
        if (p.col >= lo1 && p.col <= hi1) r1.push_back(&p);
    for (const auto& p : c2.points)
        if (p.col >= lo2 && p.col <= hi2) r2.push_back(&p);
    if (r1.empty() || r2.empty())
        return std::numeric_limits<double>::infinity();

    detail::NthSmallest nth(params.mutual_n);
    for (const auto* a : r1)
        for (const auto* b : r2) nth.add(dist3(*a, *b));
    return nth.value();
}

// Streaming cluster state across the buffers of one scan.
class Clusterer {
  public:
    explicit Clusterer(const SegParams& params) : params_(params) {}

    // Feed one segmented buffer; runs CCL over its columns, then refinement
    // and emission. Returns the clusters closed by this buffer.
    std::vector<InitialCluster> process_buffer(const PacketBuffer& buf) {
        for (const auto& col : buf.columns) {
            begin_column(col.col);
            for (const auto& p : col.points)
                if (p.valid() && p.label == GroundLabel::Obstacle) ccl_step(p);
        }
        if (params_.refine_enabled) refine(false);
        return close_and_emit();
    }

    // End of scan: seam-wraparound merge check between clusters flanking the
    // 0/360 boundary, a final refinement over everything, then emit all.
    std::vector<InitialCluster> finish_scan(int total_cols) {
        total_cols_ = total_cols;
        end_of_scan_ = true;
        if (params_.refine_enabled) refine(true);
        std::vector<InitialCluster> out;
        for (auto& [id, c] : open_) out.push_back(std::move(c));
        open_.clear();
        sort_emission(out);
        reset();
        return out;
    }

    void reset() {
        open_.clear();
        recent_.clear();
        no_merge_.clear();
        last_col_ = -1;
        total_cols_ = 0;
        end_of_scan_ = false;
        // next_id_ deliberately keeps counting across scans.
    }

    size_t open_count() const { return open_.size(); }
    const std::map<uint32_t, InitialCluster>& open_clusters() const {
        return open_;
    }

    // Mark the start of a column so the search window stays positional even
    // through columns with no obstacle points.
    void begin_column(int col) {
        recent_.push_back({col, {}});
        const size_t keep = static_cast<size_t>(params_.search_cols_far) + 1;
        while (recent_.size() > keep) recent_.pop_front();
        last_col_ = col;
    }

    // Assign one obstacle point to a cluster. Search order: own column first
    // (most recent assignment first), then previous columns nearest first,
    // each scanned newest to oldest; the first match wins.
    void ccl_step(const SphericalPoint& p) {
        const int lookback = p.rho_xy < params_.near_far_range
                                 ? params_.search_cols_near
                                 : params_.search_cols_far;
        uint32_t target = 0;
        bool found = false;
        for (auto it = recent_.rbegin(); it != recent_.rend() && !found; ++it) {
            if (it->col < p.col - lookback) break;
            for (auto pit = it->pts.rbegin(); pit != it->pts.rend(); ++pit) {
                if (std::fabs(p.rho_xy - pit->rho_xy) < params_.t_ccl) {
                    target = pit->cluster;
                    found = true;
                    break;
                }
            }
        }
        if (!found) {
            target = next_id_++;
            InitialCluster c;
            c.id = target;
            c.col_start = c.col_end = p.col;
            open_.emplace(target, std::move(c));
        }
        InitialCluster& c = open_.at(target);
        c.points.push_back(p);
        c.expand(p);
        c.col_end = std::max(c.col_end, p.col);
        recent_.back().pts.push_back({p.row, p.rho_xy, target});
    }

    // Merge linked pairs closer than t_merge, smallest distance first, until
    // a fixpoint. A pair is only scored once its inputs can no longer change:
    // at least one side must be span-frozen (no future column can reach it)
    // or the scan must be over. Scored non-merges are memoized; all inputs
    // are final at scoring time so the verdict cannot change later.
    void refine(bool end_of_scan) {
        end_of_scan_ = end_of_scan_ || end_of_scan;
        for (;;) {
            struct Cand {
                double d;
                uint32_t a, b;
                bool seam;
            };
            std::optional<Cand> best;
            std::vector<uint32_t> ids;
            ids.reserve(open_.size());
            for (const auto& [id, c] : open_) ids.push_back(id);
            for (size_t i = 0; i < ids.size(); ++i) {
                for (size_t j = i + 1; j < ids.size(); ++j) {
                    const InitialCluster& x = open_.at(ids[i]);
                    const InitialCluster& y = open_.at(ids[j]);
                    if (!end_of_scan_ && !frozen(x) && !frozen(y)) continue;
                    if (no_merge_.count({ids[i], ids[j]})) continue;
                    double d = std::numeric_limits<double>::infinity();
                    bool seam = false;
                    if (linkage(x.span(), y.span(), params_.t_neighbour) !=
                        Linkage::None) {
                        d = boxes_apart(x, y, params_.t_merge)
                                ? params_.t_merge  // lower bound; scores the
                                                   // non-merge verdict
                                : cluster_distance(x, y, params_);
                    } else if (end_of_scan_ && total_cols_ > 0) {
                        d = seam_distance(x, y);
                        seam = d < std::numeric_limits<double>::infinity();
                    }
                    const bool scored =
                        d < std::numeric_limits<double>::infinity() ||
                        end_of_scan_;
                    if (d < params_.t_merge) {
                        if (!best || d < best->d)
                            best = Cand{d, ids[i], ids[j], seam};
                    } else if (scored) {
                        // Unlinked pairs are not memoized: their spans, or
                        // the seam check, may still link them later.
                        no_merge_.insert({ids[i], ids[j]});
                    }
                }
            }
            if (!best) return;
            merge(best->a, best->b);
        }
    }

    // Close clusters whose span fell far enough behind the sweep that neither
    // CCL nor refinement can touch them again. Clusters touching the first
    // t_neighbour columns stay open regardless: they are the only possible
    // wrap-side partners of the end-of-scan seam merge check.
    std::vector<InitialCluster> close_and_emit() {
        const int horizon =
            std::max(params_.search_cols_far, params_.t_neighbour);
        std::vector<InitialCluster> out;
        for (auto it = open_.begin(); it != open_.end();) {
            if (it->second.col_start < params_.t_neighbour) {
                ++it;
                continue;
            }
            if (last_col_ - it->second.col_end > horizon) {
                out.push_back(std::move(it->second));
                it = open_.erase(it);
            } else {
                ++it;
            }
        }
        sort_emission(out);
        return out;
    }

  private:
    struct RecentPoint {
        int row;
        double rho_xy;
        uint32_t cluster;
    };
    struct RecentColumn {
        int col;
        std::vector<RecentPoint> pts;
    };

    bool frozen(const InitialCluster& c) const {
        return last_col_ - c.col_end > params_.search_cols_far;
    }

    // Seam check: would the pair be Neighbour-linked if the later cluster
    // wrapped past 0? Applies to clusters flanking the scan boundary only.
    double seam_distance(const InitialCluster& x, const InitialCluster& y) {
        // Treat the cluster nearer column 0 as the wrapped continuation.
        const InitialCluster& tail = x.col_start <= y.col_start ? y : x;
        const InitialCluster& head = x.col_start <= y.col_start ? x : y;
        const ColSpan shifted{head.col_start + total_cols_,
                              head.col_end + total_cols_};
        if (linkage(tail.span(), shifted, params_.t_neighbour) ==
            Linkage::None)
            return std::numeric_limits<double>::infinity();
        if (boxes_apart(tail, head, params_.t_merge))
            return params_.t_merge;
        return cluster_distance(tail, head, params_, total_cols_);
    }

    void merge(uint32_t a, uint32_t b) {
        const uint32_t keep = std::min(a, b);
        const uint32_t drop = std::max(a, b);
        InitialCluster& dst = open_.at(keep);
        InitialCluster& src = open_.at(drop);
        dst.points.insert(dst.points.end(),
                          std::make_move_iterator(src.points.begin()),
                          std::make_move_iterator(src.points.end()));
        dst.col_start = std::min(dst.col_start, src.col_start);
        dst.col_end = std::max(dst.col_end, src.col_end);
        dst.min_x = std::min(dst.min_x, src.min_x);
        dst.max_x = std::max(dst.max_x, src.max_x);
        dst.min_y = std::min(dst.min_y, src.min_y);
        dst.max_y = std::max(dst.max_y, src.max_y);
        dst.min_z = std::min(dst.min_z, src.min_z);
        dst.max_z = std::max(dst.max_z, src.max_z);
        open_.erase(drop);
        // Search-window entries still carry the dropped id; a later ccl_step
        // match must land on the survivor, not a dead cluster.
        for (auto& rc : recent_)
            for (auto& rp : rc.pts)
                if (rp.cluster == drop) rp.cluster = keep;
        // The survivor is a new aggregate; forget verdicts that involved it.
        for (auto it = no_merge_.begin(); it != no_merge_.end();) {
            if (it->first == keep || it->second == keep ||
                it->first == drop || it->second == drop)
                it = no_merge_.erase(it);
            else
                ++it;
        }
    }

    static void sort_emission(std::vector<InitialCluster>& v) {
        std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
            return std::tie(a.col_start, a.col_end, a.id) <
                   std::tie(b.col_start, b.col_end, b.id);
        });
    }

    SegParams params_;
    std::map<uint32_t, InitialCluster> open_;
    std::deque<RecentColumn> recent_;
    std::set<std::pair<uint32_t, uint32_t>> no_merge_;
    uint32_t next_id_ = 1;
    int last_col_ = -1;
    int total_cols_ = 0;
    bool end_of_scan_ = false;
};

}  // namespace streamseg
