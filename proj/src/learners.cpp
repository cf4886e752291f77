#include "geoecon/learners.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "geoecon/binio.hpp"
#include "geoecon/error.hpp"
#include "geoecon/parallel.hpp"
#include "geoecon/statistics.hpp"

namespace geoecon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kQnan = std::numeric_limits<double>::quiet_NaN();

constexpr uint64_t kTreeTag = 0x7265651;   // per-tree streams
constexpr uint64_t kPermTag = 0x7065726d;  // permutation importance streams

void check_training_data(const MatrixView& X, std::span<const double> y) {
  if (X.n_rows == 0 || X.n_cols == 0)
    throw ValidationError("empty design matrix");
  if (y.size() != X.n_rows)
    throw ValidationError("target length does not match design rows");
  if (X.n_rows >= 65536)
    throw ValidationError("more than 65535 training rows are not supported");
  for (size_t c = 0; c < X.n_cols; ++c) {
    const double* col = X.col(c);
    for (size_t r = 0; r < X.n_rows; ++r)
      if (std::isnan(col[r]))
        throw ValidationError("missing value in design column " +
                              std::to_string(c));
  }
  for (double v : y)
    if (!std::isfinite(v)) throw ValidationError("non-finite target value");
}

// per-feature row order, sorted by (value, row); shared across trees
std::vector<int32_t> make_presort(const MatrixView& X) {
  std::vector<int32_t> order(X.n_cols * X.n_rows);
  parallel_for(0, X.n_cols, [&](size_t f) {
    int32_t* o = order.data() + f * X.n_rows;
    std::iota(o, o + X.n_rows, 0);
    const double* col = X.col(f);
    std::sort(o, o + X.n_rows, [col](int32_t a, int32_t b) {
      return col[a] != col[b] ? col[a] < col[b] : a < b;
    });
  });
  return order;
}

struct CandidateBest {
  double gain = kNegInf;  // left_sum^2/left_w + right_sum^2/right_w
  size_t pos = 0;         // boundary: positions [begin, pos] go left
  double left_w = 0;
  double left_sum = 0;
};

class TreeBuilder {
public:
  TreeBuilder(const MatrixView& X, const int32_t* presort)
      : X_(X), presort_(presort), n_(X.n_rows), p_(X.n_cols) {
    side_.resize(n_);
    w_.resize(n_);
    feat_perm_.resize(p_);
    std::iota(feat_perm_.begin(), feat_perm_.end(), 0);
  }

  // weights: bootstrap multiplicity per row (empty = all ones); gain_accum,
  // when given, receives the summed SSE decrease per feature
  Tree build(std::span<const double> y, std::span<const uint16_t> weights,
             const TreeParams& params, Rng& rng, double* gain_accum) {
    y_ = y.data();
    weighted_ = !weights.empty();
    // builders are reused across trees; the candidate scratch must start
    // from the identity or results would depend on which worker built what
    std::iota(feat_perm_.begin(), feat_perm_.end(), 0);
    size_t cap = 0;
    if (!weighted_) {
      cap = n_;
      for (size_t r = 0; r < n_; ++r) {
        w_[r].w = 1.0;
        w_[r].wy = y_[r];
      }
    } else {
      for (size_t r = 0; r < n_; ++r) {
        w_[r].w = weights[r];
        w_[r].wy = weights[r] * y_[r];
        cap += weights[r] > 0 ? 1 : 0;
      }
    }
    cap_ = cap;
    stride_ = cap + 1;  // sentinel slot: the predicated root fill writes one
                        // past the segment when trailing rows are out-of-bag
    vals_.resize(p_ * stride_);
    idxs_.resize(p_ * stride_);
    tmp_v_.resize(cap);
    tmp_i_.resize(cap);

    // root segments from the shared presort, skipping out-of-bag rows;
    // predicated writes, the in-bag test mispredicts badly otherwise
    parallel_for(0, p_, [&](size_t f) {
      const int32_t* src = presort_ + f * n_;
      double* v = vals_.data() + f * stride_;
      int32_t* id = idxs_.data() + f * stride_;
      const double* col = X_.col(f);
      size_t j = 0;
      for (size_t i = 0; i < n_; ++i) {
        const int32_t r = src[i];
        v[j] = col[r];
        id[j] = r;
        j += w_[r].w > 0.0 ? 1 : 0;
      }
    });

    Task root{};
    root.begin = 0;
    root.end = cap_;
    root.node = 0;
    root.depth = 0;
    root.ymin = std::numeric_limits<double>::infinity();
    root.ymax = -std::numeric_limits<double>::infinity();
    for (size_t r = 0; r < n_; ++r) {
      if (w_[r].w <= 0.0) continue;
      root.wsum += w_[r].w;
      root.ysum += w_[r].wy;
      root.ymin = std::min(root.ymin, y_[r]);
      root.ymax = std::max(root.ymax, y_[r]);
    }

    tree_ = Tree{};
    append_node();
    std::vector<Task> stack{root};
    const int mtry =
        params.mtry <= 0 ? static_cast<int>(p_)
                         : std::min(params.mtry, static_cast<int>(p_));
    while (!stack.empty()) {
      Task task = stack.back();
      stack.pop_back();
      grow(task, params, mtry, rng, gain_accum, stack);
    }
    return std::move(tree_);
  }

private:
  struct Task {
    size_t begin = 0, end = 0;
    int32_t node = 0;
    int depth = 0;
    double wsum = 0, ysum = 0;
    double ymin = 0, ymax = 0;
  };

  void append_node() {
    tree_.feature.push_back(-1);
    tree_.threshold.push_back(0.0);
    tree_.left.push_back(-1);
    tree_.right.push_back(-1);
    tree_.value.push_back(0.0);
    tree_.count.push_back(0);
  }

  // leaf aggregates are recomputed from the rows: the task's running sums
  // come through subtraction chains and can drift a few ulps, which would
  // break exact training-target recovery on saturated trees
  void make_leaf(const Task& t) {
    const int32_t* id = idxs_.data();  // feature 0 stripe holds the node rows
    double ws = 0.0, ys = 0.0;
    for (size_t k = t.begin; k < t.end; ++k) {
      const int32_t r = id[k];
      ws += w_[r].w;
      ys += w_[r].wy;
    }
    tree_.feature[t.node] = -1;
    tree_.value[t.node] = ys / ws;
    tree_.count[t.node] = static_cast<int32_t>(ws);
  }

  template <bool Weighted>
  CandidateBest scan_feature_impl(size_t f, const Task& t,
                                  double min_leaf) const {
    CandidateBest best;
    const double* v = vals_.data() + f * stride_;
    const int32_t* id = idxs_.data() + f * stride_;
    double lw = 0.0, ls = 0.0;
    const double wsum = t.wsum, ysum = t.ysum;
    for (size_t k = t.begin; k + 1 < t.end; ++k) {
      const int32_t r = id[k];
      if constexpr (Weighted) {
        lw += w_[r].w;
        ls += w_[r].wy;
      } else {
        lw += 1.0;
        ls += y_[r];
      }
      if (v[k] < v[k + 1]) {
        const double rw = wsum - lw;
        if (lw >= min_leaf && rw >= min_leaf) {
          const double rs = ysum - ls;
          const double gain = ls * ls / lw + rs * rs / rw;
          if (gain > best.gain) {
            best.gain = gain;
            best.pos = k;
            best.left_w = lw;
            best.left_sum = ls;
          }
        }
      }
    }
    return best;
  }

  CandidateBest scan_feature(size_t f, const Task& t, double min_leaf) const {
    return weighted_ ? scan_feature_impl<true>(f, t, min_leaf)
                     : scan_feature_impl<false>(f, t, min_leaf);
  }

  void grow(const Task& t, const TreeParams& params, int mtry, Rng& rng,
            double* gain_accum, std::vector<Task>& stack) {
    const double min_leaf = params.min_leaf;
    const bool depth_ok = params.max_depth == 0 || t.depth < params.max_depth;
    if (!depth_ok || t.wsum < 2.0 * min_leaf || !(t.ymin < t.ymax)) {
      make_leaf(t);
      return;
    }

    // candidate features, ascending so gain ties resolve to the lowest index
    size_t n_cand;
    if (mtry >= static_cast<int>(p_)) {
      n_cand = p_;
      cand_.resize(p_);
      std::iota(cand_.begin(), cand_.end(), 0);
    } else {
      n_cand = static_cast<size_t>(mtry);
      for (size_t i = 0; i < n_cand; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(p_ - i));
        std::swap(feat_perm_[i], feat_perm_[j]);
      }
      cand_.assign(feat_perm_.begin(), feat_perm_.begin() + n_cand);
      std::sort(cand_.begin(), cand_.end());
    }

    cand_best_.assign(n_cand, CandidateBest{});
    if (n_cand >= 16 && thread_count() > 1) {
      parallel_for(0, n_cand, [&](size_t c) {
        cand_best_[c] = scan_feature(cand_[c], t, min_leaf);
      });
    } else {
      for (size_t c = 0; c < n_cand; ++c)
        cand_best_[c] = scan_feature(cand_[c], t, min_leaf);
    }

    const double parent_term = t.ysum * t.ysum / t.wsum;
    CandidateBest best;
    size_t best_f = 0;
    for (size_t c = 0; c < n_cand; ++c) {
      if (cand_best_[c].gain > best.gain) {
        best = cand_best_[c];
        best_f = cand_[c];
      }
    }
    if (!(best.gain > parent_term)) {
      make_leaf(t);
      return;
    }
    if (gain_accum) gain_accum[best_f] += best.gain - parent_term;

    // threshold between the boundary values; ulp-adjacent pairs split on the
    // lower value so "x <= threshold" matches the position split exactly
    const double* v = vals_.data() + best_f * stride_;
    double thr = v[best.pos] + 0.5 * (v[best.pos + 1] - v[best.pos]);
    if (!(thr >= v[best.pos]) || thr >= v[best.pos + 1]) thr = v[best.pos];

    // side flags + child extrema
    Task lt{}, rt{};
    lt.ymin = rt.ymin = std::numeric_limits<double>::infinity();
    lt.ymax = rt.ymax = -std::numeric_limits<double>::infinity();
    const int32_t* id = idxs_.data() + best_f * stride_;
    for (size_t k = t.begin; k < t.end; ++k) {
      const int32_t r = id[k];
      const bool go_left = k <= best.pos;
      side_[r] = go_left ? 0 : 1;
      if (go_left) {
        lt.ymin = std::min(lt.ymin, y_[r]);
        lt.ymax = std::max(lt.ymax, y_[r]);
      } else {
        rt.ymin = std::min(rt.ymin, y_[r]);
        rt.ymax = std::max(rt.ymax, y_[r]);
      }
    }

    // stable partition of every other feature's segment; both targets are
    // written unconditionally and the cursors advance by the side bit, the
    // sides are close to random and a branch here dominates the build
    const size_t mid = t.begin + (best.pos - t.begin) + 1;
    for (size_t f = 0; f < p_; ++f) {
      if (f == best_f) continue;
      double* fv = vals_.data() + f * stride_;
      int32_t* fi = idxs_.data() + f * stride_;
      size_t write = t.begin, nr = 0;
      for (size_t k = t.begin; k < t.end; ++k) {
        const double v = fv[k];
        const int32_t r = fi[k];
        const uint8_t s = side_[r];
        fv[write] = v;
        fi[write] = r;
        tmp_v_[nr] = v;
        tmp_i_[nr] = r;
        write += 1 - s;
        nr += s;
      }
      std::memcpy(fv + write, tmp_v_.data(), nr * sizeof(double));
      std::memcpy(fi + write, tmp_i_.data(), nr * sizeof(int32_t));
    }

    const auto left_id = static_cast<int32_t>(tree_.n_nodes());
    append_node();
    append_node();
    tree_.feature[t.node] = static_cast<int32_t>(best_f);
    tree_.threshold[t.node] = thr;
    tree_.left[t.node] = left_id;
    tree_.right[t.node] = left_id + 1;

    lt.begin = t.begin;
    lt.end = mid;
    lt.node = left_id;
    lt.depth = t.depth + 1;
    lt.wsum = best.left_w;
    lt.ysum = best.left_sum;
    rt.begin = mid;
    rt.end = t.end;
    rt.node = left_id + 1;
    rt.depth = t.depth + 1;
    rt.wsum = t.wsum - best.left_w;
    rt.ysum = t.ysum - best.left_sum;
    stack.push_back(rt);
    stack.push_back(lt);  // left grows first
  }

  struct WeightPair {
    double w, wy;
  };

  const MatrixView& X_;
  const int32_t* presort_;
  size_t n_, p_, cap_ = 0, stride_ = 0;
  bool weighted_ = false;
  const double* y_ = nullptr;
  std::vector<WeightPair> w_;
  std::vector<double> vals_;
  std::vector<int32_t> idxs_;
  std::vector<double> tmp_v_;
  std::vector<int32_t> tmp_i_;
  std::vector<uint8_t> side_;
  std::vector<uint32_t> feat_perm_;
  std::vector<size_t> cand_;
  std::vector<CandidateBest> cand_best_;
  Tree tree_;
};

std::vector<uint16_t> draw_bootstrap(size_t n, Rng& rng) {
  std::vector<uint16_t> counts(n, 0);
  for (size_t i = 0; i < n; ++i) ++counts[rng.below(n)];
  return counts;
}

}  // namespace

std::vector<double> gather_rows(const MatrixView& X,
                                std::span<const size_t> rows) {
  std::vector<double> out(rows.size() * X.n_cols);
  for (size_t c = 0; c < X.n_cols; ++c) {
    const double* src = X.col(c);
    double* dst = out.data() + c * rows.size();
    for (size_t i = 0; i < rows.size(); ++i) dst[i] = src[rows[i]];
  }
  return out;
}

size_t Tree::n_leaves() const {
  size_t n = 0;
  for (auto f : feature) n += f < 0 ? 1 : 0;
  return n;
}

double Tree::predict_row(const MatrixView& X, size_t row) const {
  int32_t node = 0;
  while (feature[node] >= 0)
    node = X.at(row, static_cast<size_t>(feature[node])) <= threshold[node]
               ? left[node]
               : right[node];
  return value[node];
}

double Tree::predict_row_override(const MatrixView& X, size_t row,
                                  size_t ov_col, double ov_val) const {
  int32_t node = 0;
  while (feature[node] >= 0) {
    const auto f = static_cast<size_t>(feature[node]);
    const double x = f == ov_col ? ov_val : X.at(row, f);
    node = x <= threshold[node] ? left[node] : right[node];
  }
  return value[node];
}

Tree fit_tree(const MatrixView& X, std::span<const double> y,
              const TreeParams& params, Rng& rng) {
  check_training_data(X, y);
  if (params.min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  if (X.n_rows < 2 * static_cast<size_t>(params.min_leaf))
    throw ValidationError("need at least 2*min_leaf rows");
  const auto presort = make_presort(X);
  TreeBuilder builder(X, presort.data());
  return builder.build(y, {}, params, rng, nullptr);
}

ForestModel fit_forest(const MatrixView& X, std::span<const double> y,
                       ForestParams params,
                       std::vector<std::string> feature_names) {
  check_training_data(X, y);
  if (params.n_trees < 1) throw ValidationError("n_trees must be >= 1");
  if (params.min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  if (X.n_rows < 2 * static_cast<size_t>(params.min_leaf))
    throw ValidationError("need at least 2*min_leaf rows");
  const size_t n = X.n_rows, p = X.n_cols;
  if (params.mtry <= 0)
    params.mtry = static_cast<int>((p + 2) / 3);  // ceil(p / 3)
  if (!feature_names.empty() && feature_names.size() != p)
    throw ValidationError("feature name count does not match design columns");

  const auto presort = make_presort(X);
  const auto n_trees = static_cast<size_t>(params.n_trees);

  ForestModel model;
  model.trees.resize(n_trees);
  model.inbag.assign(n_trees * n, 1);
  model.split_gain.assign(n_trees * p, 0.0);
  model.n_train = n;
  model.n_features = p;
  model.params = params;
  model.feature_names = std::move(feature_names);

  TreeParams tp;
  tp.min_leaf = params.min_leaf;
  tp.mtry = params.mtry;

  // trees are handed out in contiguous blocks so each worker reuses one
  // builder; per-tree rng streams keep results independent of the schedule
  const auto workers =
      std::min<size_t>(static_cast<size_t>(thread_count()), n_trees);
  const size_t chunk = (n_trees + workers - 1) / workers;
  parallel_for(0, workers, [&](size_t w) {
    TreeBuilder builder(X, presort.data());
    const size_t lo = w * chunk;
    const size_t hi = std::min(n_trees, lo + chunk);
    for (size_t t = lo; t < hi; ++t) {
      Rng rng(derive_seed(params.seed, kTreeTag, t));
      std::span<const uint16_t> weights;
      if (params.bootstrap) {
        auto counts = draw_bootstrap(n, rng);
        std::copy(counts.begin(), counts.end(),
                  model.inbag.begin() + t * n);
        weights = {model.inbag.data() + t * n, n};
      }
      model.trees[t] =
          builder.build(y, weights, tp, rng, model.split_gain.data() + t * p);
    }
  });
  return model;
}

std::vector<double> predict(const ForestModel& model, const MatrixView& X) {
  if (X.n_cols != model.n_features)
    throw ValidationError("prediction matrix column count mismatch");
  const size_t q = X.n_rows;
  std::vector<double> out(q, 0.0);
  const auto workers = std::max<size_t>(1, std::min<size_t>(thread_count(), q));
  const size_t chunk = (q + workers - 1) / workers;
  parallel_for(0, workers, [&](size_t w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(q, lo + chunk);
    for (const auto& tree : model.trees)
      for (size_t r = lo; r < hi; ++r) out[r] += tree.predict_row(X, r);
  });
  const auto nt = static_cast<double>(model.trees.size());
  for (auto& v : out) v /= nt;
  return out;
}

OobPrediction oob_predict(const ForestModel& model, const MatrixView& X) {
  if (X.n_rows != model.n_train)
    throw ValidationError("out-of-bag prediction needs the training matrix");
  const size_t q = X.n_rows;
  OobPrediction out;
  out.pred.assign(q, 0.0);
  out.coverage.assign(q, 0);
  const auto workers = std::max<size_t>(1, std::min<size_t>(thread_count(), q));
  const size_t chunk = (q + workers - 1) / workers;
  parallel_for(0, workers, [&](size_t w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(q, lo + chunk);
    for (size_t t = 0; t < model.trees.size(); ++t) {
      const uint16_t* bag = model.inbag.data() + t * model.n_train;
      for (size_t r = lo; r < hi; ++r) {
        if (bag[r] != 0) continue;
        out.pred[r] += model.trees[t].predict_row(X, r);
        ++out.coverage[r];
      }
    }
  });
  for (size_t r = 0; r < q; ++r) {
    if (out.coverage[r] > 0)
      out.pred[r] /= out.coverage[r];
    else
      out.pred[r] = kQnan;
  }
  return out;
}

ImportanceVector permutation_importance(const ForestModel& model,
                                        const MatrixView& X,
                                        std::span<const double> y,
                                        uint64_t seed) {
  if (X.n_rows != model.n_train || y.size() != model.n_train)
    throw ValidationError("permutation importance needs the training data");
  const size_t p = model.n_features;
  const size_t n_trees = model.trees.size();

  // per-tree contributions, reduced in tree order afterwards
  std::vector<double> contrib(n_trees * p, kQnan);
  parallel_for(0, n_trees, [&](size_t t) {
    const uint16_t* bag = model.inbag.data() + t * model.n_train;
    std::vector<size_t> oob;
    for (size_t r = 0; r < model.n_train; ++r)
      if (bag[r] == 0) oob.push_back(r);
    if (oob.empty()) return;  // contributes nothing
    const auto n_oob = static_cast<double>(oob.size());
    const Tree& tree = model.trees[t];

    double base = 0.0;
    for (size_t r : oob) base += std::abs(tree.predict_row(X, r) - y[r]);
    base /= n_oob;

    std::vector<size_t> perm(oob.size());
    for (size_t f = 0; f < p; ++f) {
      std::copy(oob.begin(), oob.end(), perm.begin());
      Rng rng(derive_seed(seed, kPermTag, t, f));
      rng.shuffle(std::span<size_t>(perm));
      const double* col = X.col(f);
      double err = 0.0;
      for (size_t j = 0; j < oob.size(); ++j)
        err += std::abs(
            tree.predict_row_override(X, oob[j], f, col[perm[j]]) - y[oob[j]]);
      contrib[t * p + f] = err / n_oob - base;
    }
  });

  ImportanceVector out;
  out.names = model.feature_names;
  if (out.names.empty())
    for (size_t f = 0; f < p; ++f) out.names.push_back("x" + std::to_string(f));
  out.importance.assign(p, 0.0);
  out.std_error.assign(p, 0.0);
  size_t used = 0;
  for (size_t t = 0; t < n_trees; ++t) {
    if (std::isnan(contrib[t * p])) continue;
    ++used;
    for (size_t f = 0; f < p; ++f) out.importance[f] += contrib[t * p + f];
  }
  if (used == 0)
    throw ValidationError("no tree has out-of-bag rows (bootstrap disabled?)");
  for (size_t f = 0; f < p; ++f) out.importance[f] /= static_cast<double>(used);
  if (used > 1) {
    for (size_t t = 0; t < n_trees; ++t) {
      if (std::isnan(contrib[t * p])) continue;
      for (size_t f = 0; f < p; ++f) {
        const double d = contrib[t * p + f] - out.importance[f];
        out.std_error[f] += d * d;
      }
    }
    for (size_t f = 0; f < p; ++f)
      out.std_error[f] = std::sqrt(out.std_error[f] /
                                   static_cast<double>(used - 1)) /
                         std::sqrt(static_cast<double>(used));
  }
  return out;
}

std::vector<double> impurity_importance(const ForestModel& model) {
  const size_t p = model.n_features;
  std::vector<double> out(p, 0.0);
  for (size_t t = 0; t < model.trees.size(); ++t)
    for (size_t f = 0; f < p; ++f) out[f] += model.split_gain[t * p + f];
  for (auto& v : out) v /= static_cast<double>(model.trees.size());
  return out;
}

GBModel fit_gb(const MatrixView& X, std::span<const double> y, GBParams params,
               std::vector<std::string> feature_names) {
  check_training_data(X, y);
  if (params.n_rounds < 0) throw ValidationError("negative boosting rounds");
  if (params.max_depth < 1) throw ValidationError("max_depth must be >= 1");
  if (params.min_leaf < 1) throw ValidationError("min_leaf must be >= 1");
  if (!feature_names.empty() && feature_names.size() != X.n_cols)
    throw ValidationError("feature name count does not match design columns");

  GBModel model;
  model.base = mean(y);
  model.learning_rate = params.learning_rate;
  model.n_features = X.n_cols;
  model.feature_names = std::move(feature_names);
  if (params.n_rounds == 0) return model;
  if (X.n_rows < 2 * static_cast<size_t>(params.min_leaf))
    throw ValidationError("need at least 2*min_leaf rows");

  const auto presort = make_presort(X);
  TreeBuilder builder(X, presort.data());
  TreeParams tp;
  tp.min_leaf = params.min_leaf;
  tp.mtry = 0;  // all features
  tp.max_depth = params.max_depth;
  Rng rng(0);  // unused: no feature subsampling

  std::vector<double> residual(y.begin(), y.end());
  for (auto& r : residual) r -= model.base;

  model.trees.reserve(params.n_rounds);
  for (int round = 0; round < params.n_rounds; ++round) {
    Tree tree = builder.build(residual, {}, tp, rng, nullptr);
    for (size_t r = 0; r < X.n_rows; ++r)
      residual[r] -= params.learning_rate * tree.predict_row(X, r);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

std::vector<double> predict(const GBModel& model, const MatrixView& X) {
  if (X.n_cols != model.n_features)
    throw ValidationError("prediction matrix column count mismatch");
  std::vector<double> out(X.n_rows, model.base);
  const size_t q = X.n_rows;
  const auto workers = std::max<size_t>(1, std::min<size_t>(thread_count(), q));
  const size_t chunk = (q + workers - 1) / workers;
  parallel_for(0, workers, [&](size_t w) {
    const size_t lo = w * chunk;
    const size_t hi = std::min(q, lo + chunk);
    for (const auto& tree : model.trees)
      for (size_t r = lo; r < hi; ++r)
        out[r] += model.learning_rate * tree.predict_row(X, r);
  });
  return out;
}

OLSModel fit_ols(const MatrixView& X, std::span<const double> y,
                 std::vector<std::string> feature_names) {
  check_training_data(X, y);
  const size_t m = X.n_rows;
  const size_t nc = X.n_cols + 1;  // intercept first
  if (m <= X.n_cols)
    throw ValidationError("least squares needs more rows than features");
  if (!feature_names.empty() && feature_names.size() != X.n_cols)
    throw ValidationError("feature name count does not match design columns");

  std::vector<double> A(m * nc);
  std::fill(A.begin(), A.begin() + m, 1.0);
  for (size_t c = 0; c < X.n_cols; ++c)
    std::copy(X.col(c), X.col(c) + m, A.begin() + (c + 1) * m);
  std::vector<double> qty(y.begin(), y.end());
  std::vector<size_t> piv(nc);
  std::iota(piv.begin(), piv.end(), 0);

  auto col_name = [&](size_t j) {
    if (j == 0) return std::string("(intercept)");
    return feature_names.empty() ? "column " + std::to_string(j - 1)
                                 : feature_names[j - 1];
  };

  // Householder QR with column pivoting
  double tol = 0.0;
  size_t rank = 0;
  for (size_t k = 0; k < nc; ++k) {
    size_t best = k;
    double best_norm2 = -1.0;
    for (size_t j = k; j < nc; ++j) {
      double s = 0.0;
      const double* col = A.data() + j * m;
      for (size_t i = k; i < m; ++i) s += col[i] * col[i];
      if (s > best_norm2) {
        best_norm2 = s;
        best = j;
      }
    }
    if (best != k) {
      for (size_t i = 0; i < m; ++i)
        std::swap(A[best * m + i], A[k * m + i]);
      std::swap(piv[best], piv[k]);
    }
    const double norm = std::sqrt(std::max(0.0, best_norm2));
    if (k == 0) {
      tol = norm * std::numeric_limits<double>::epsilon() *
            static_cast<double>(std::max(m, nc));
      if (norm == 0.0) throw ValidationError("design matrix is all zero");
    }
    if (norm <= tol) break;
    ++rank;

    double* ck = A.data() + k * m;
    const double alpha = ck[k] >= 0 ? -norm : norm;
    ck[k] -= alpha;
    const double vnorm2 = -2.0 * alpha * ck[k];  // |v|^2 for the reflector
    if (vnorm2 > 0.0) {
      for (size_t j = k + 1; j < nc; ++j) {
        double* cj = A.data() + j * m;
        double dot = 0.0;
        for (size_t i = k; i < m; ++i) dot += ck[i] * cj[i];
        const double scale = 2.0 * dot / vnorm2;
        for (size_t i = k; i < m; ++i) cj[i] -= scale * ck[i];
      }
      double dot = 0.0;
      for (size_t i = k; i < m; ++i) dot += ck[i] * qty[i];
      const double scale = 2.0 * dot / vnorm2;
      for (size_t i = k; i < m; ++i) qty[i] -= scale * ck[i];
    }
    ck[k] = alpha;  // diagonal of R
  }

  if (rank < nc) {
    std::string deps;
    for (size_t j = rank; j < nc; ++j) {
      if (!deps.empty()) deps += ", ";
      deps += col_name(piv[j]);
    }
    throw ValidationError("design is rank deficient; dependent columns: " +
                          deps);
  }

  // back substitution on R
  std::vector<double> beta_piv(nc, 0.0);
  for (size_t kk = nc; kk-- > 0;) {
    double s = qty[kk];
    for (size_t j = kk + 1; j < nc; ++j) s -= A[j * m + kk] * beta_piv[j];
    beta_piv[kk] = s / A[kk * m + kk];
  }

  OLSModel model;
  model.coef.assign(X.n_cols, 0.0);
  model.feature_names = std::move(feature_names);
  for (size_t j = 0; j < nc; ++j) {
    if (piv[j] == 0)
      model.intercept = beta_piv[j];
    else
      model.coef[piv[j] - 1] = beta_piv[j];
  }
  return model;
}

std::vector<double> predict(const OLSModel& model, const MatrixView& X) {
  if (X.n_cols != model.coef.size())
    throw ValidationError("prediction matrix column count mismatch");
  std::vector<double> out(X.n_rows, model.intercept);
  for (size_t c = 0; c < X.n_cols; ++c) {
    const double* col = X.col(c);
    const double b = model.coef[c];
    for (size_t r = 0; r < X.n_rows; ++r) out[r] += b * col[r];
  }
  return out;
}

AnyModel fit_model(const ModelSpec& spec, const MatrixView& X,
                   std::span<const double> y, uint64_t seed,
                   std::vector<std::string> feature_names) {
  switch (spec.kind) {
    case ModelSpec::Kind::rf: {
      ForestParams p = spec.rf;
      p.seed = seed;
      return fit_forest(X, y, p, std::move(feature_names));
    }
    case ModelSpec::Kind::gb:
      return fit_gb(X, y, spec.gb, std::move(feature_names));
    case ModelSpec::Kind::ols:
      return fit_ols(X, y, std::move(feature_names));
  }
  throw InternalError("unknown model kind");
}

std::vector<double> predict_model(const AnyModel& model, const MatrixView& X) {
  return std::visit([&](const auto& m) { return predict(m, X); }, model);
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr char kGeomMagic[4] = {'G', 'E', 'O', 'M'};
constexpr uint16_t kGeomVersion = 1;

void write_tree(BinWriter& w, const Tree& t) {
  w.pod<uint32_t>(static_cast<uint32_t>(t.n_nodes()));
  w.array<int32_t>(t.feature);
  w.array<double>(t.threshold);
  w.array<int32_t>(t.left);
  w.array<int32_t>(t.right);
  w.array<double>(t.value);
  w.array<int32_t>(t.count);
}

Tree read_tree(BinReader& r) {
  Tree t;
  const auto n = r.pod<uint32_t>();
  t.feature.resize(n);
  t.threshold.resize(n);
  t.left.resize(n);
  t.right.resize(n);
  t.value.resize(n);
  t.count.resize(n);
  r.array<int32_t>(t.feature);
  r.array<double>(t.threshold);
  r.array<int32_t>(t.left);
  r.array<int32_t>(t.right);
  r.array<double>(t.value);
  r.array<int32_t>(t.count);
  return t;
}

void write_names(BinWriter& w, const std::vector<std::string>& names) {
  w.pod<uint32_t>(static_cast<uint32_t>(names.size()));
  for (const auto& n : names) w.str(n);
}

std::vector<std::string> read_names(BinReader& r) {
  std::vector<std::string> names(r.pod<uint32_t>());
  for (auto& n : names) n = r.str();
  return names;
}

nlohmann::json tree_to_json(const Tree& t) {
  return {{"feature", t.feature}, {"threshold", t.threshold},
          {"left", t.left},       {"right", t.right},
          {"value", t.value},     {"count", t.count}};
}

}  // namespace

void save_model(const std::string& path, const AnyModel& model) {
  BinWriter w(path);
  w.bytes(kGeomMagic, 4);
  w.pod<uint16_t>(kGeomVersion);
  if (const auto* rf = std::get_if<ForestModel>(&model)) {
    w.pod<uint8_t>(1);
    w.pod<int32_t>(rf->params.n_trees);
    w.pod<int32_t>(rf->params.mtry);
    w.pod<int32_t>(rf->params.min_leaf);
    w.pod<uint64_t>(rf->params.seed);
    w.pod<uint8_t>(rf->params.bootstrap ? 1 : 0);
    w.pod<uint64_t>(rf->n_train);
    w.pod<uint64_t>(rf->n_features);
    write_names(w, rf->feature_names);
    for (const auto& t : rf->trees) write_tree(w, t);
    w.array<uint16_t>(rf->inbag);
    w.array<double>(rf->split_gain);
  } else if (const auto* gb = std::get_if<GBModel>(&model)) {
    w.pod<uint8_t>(2);
    w.pod<double>(gb->base);
    w.pod<double>(gb->learning_rate);
    w.pod<uint64_t>(gb->n_features);
    w.pod<uint32_t>(static_cast<uint32_t>(gb->trees.size()));
    write_names(w, gb->feature_names);
    for (const auto& t : gb->trees) write_tree(w, t);
  } else {
    const auto& ols = std::get<OLSModel>(model);
    w.pod<uint8_t>(3);
    w.pod<double>(ols.intercept);
    w.pod<uint64_t>(ols.coef.size());
    write_names(w, ols.feature_names);
    w.array<double>(ols.coef);
  }
}

AnyModel load_model(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kGeomMagic, 4) != 0)
    throw ValidationError("'" + path + "': not a GEOM model file");
  if (r.pod<uint16_t>() != kGeomVersion)
    throw ValidationError("'" + path + "': unsupported GEOM version");
  const auto kind = r.pod<uint8_t>();
  if (kind == 1) {
    ForestModel rf;
    rf.params.n_trees = r.pod<int32_t>();
    rf.params.mtry = r.pod<int32_t>();
    rf.params.min_leaf = r.pod<int32_t>();
    rf.params.seed = r.pod<uint64_t>();
    rf.params.bootstrap = r.pod<uint8_t>() != 0;
    rf.n_train = r.pod<uint64_t>();
    rf.n_features = r.pod<uint64_t>();
    rf.feature_names = read_names(r);
    rf.trees.reserve(rf.params.n_trees);
    for (int t = 0; t < rf.params.n_trees; ++t) rf.trees.push_back(read_tree(r));
    rf.inbag.resize(rf.trees.size() * rf.n_train);
    r.array<uint16_t>(rf.inbag);
    rf.split_gain.resize(rf.trees.size() * rf.n_features);
    r.array<double>(rf.split_gain);
    return rf;
  }
  if (kind == 2) {
    GBModel gb;
    gb.base = r.pod<double>();
    gb.learning_rate = r.pod<double>();
    gb.n_features = r.pod<uint64_t>();
    const auto nt = r.pod<uint32_t>();
    gb.feature_names = read_names(r);
    gb.trees.reserve(nt);
    for (uint32_t t = 0; t < nt; ++t) gb.trees.push_back(read_tree(r));
    return gb;
  }
  if (kind == 3) {
    OLSModel ols;
    ols.intercept = r.pod<double>();
    const auto p = r.pod<uint64_t>();
    ols.feature_names = read_names(r);
    ols.coef.resize(p);
    r.array<double>(ols.coef);
    return ols;
  }
  throw ValidationError("'" + path + "': unknown model kind " +
                        std::to_string(kind));
}

std::string model_to_json(const AnyModel& model) {
  nlohmann::json j;
  if (const auto* rf = std::get_if<ForestModel>(&model)) {
    j["kind"] = "random_forest";
    j["params"] = {{"n_trees", rf->params.n_trees},
                   {"mtry", rf->params.mtry},
                   {"min_leaf", rf->params.min_leaf},
                   {"seed", rf->params.seed},
                   {"bootstrap", rf->params.bootstrap}};
    j["n_train"] = rf->n_train;
    j["feature_names"] = rf->feature_names;
    auto& trees = j["trees"];
    for (const auto& t : rf->trees) trees.push_back(tree_to_json(t));
  } else if (const auto* gb = std::get_if<GBModel>(&model)) {
    j["kind"] = "gradient_boosting";
    j["base"] = gb->base;
    j["learning_rate"] = gb->learning_rate;
    j["feature_names"] = gb->feature_names;
    auto& trees = j["trees"];
    for (const auto& t : gb->trees) trees.push_back(tree_to_json(t));
  } else {
    const auto& ols = std::get<OLSModel>(model);
    j["kind"] = "least_squares";
    j["intercept"] = ols.intercept;
    j["coef"] = ols.coef;
    j["feature_names"] = ols.feature_names;
  }
  return j.dump(2);
}

}  // namespace geoecon
