#include "cdsal/models.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace cdsal {

namespace {

Point block_center(const FrameFeatures& frame, int bx, int by) {
  const double half = 0.5 * frame.block_size;
  return {bx * frame.block_size + half, by * frame.block_size + half};
}

GlobalMotion fit_similarity(std::span<const BlockDisplacement> field,
                            const std::vector<std::size_t>& use) {
  const double n = static_cast<double>(use.size());
  double mx = 0.0, my = 0.0, mu = 0.0, mv = 0.0;
  for (std::size_t i : use) {
    const BlockDisplacement& d = field[i];
    mx += d.center.x;
    my += d.center.y;
    mu += d.center.x + d.displacement.x;
    mv += d.center.y + d.displacement.y;
  }
  mx /= n;
  my /= n;
  mu /= n;
  mv /= n;
  double sxx = 0.0, sa = 0.0, sb = 0.0;
  for (std::size_t i : use) {
    const BlockDisplacement& d = field[i];
    const double x = d.center.x - mx;
    const double y = d.center.y - my;
    const double u = d.center.x + d.displacement.x - mu;
    const double v = d.center.y + d.displacement.y - mv;
    sxx += x * x + y * y;
    sa += x * u + y * v;
    sb += x * v - y * u;
  }
  GlobalMotion g;
  if (sxx > 0.0) {
    g.a = sa / sxx;
    g.b = sb / sxx;
  }
  g.tx = mu - (g.a * mx - g.b * my);
  g.ty = mv - (g.b * mx + g.a * my);
  return g;
}

double residual(const GlobalMotion& g, const BlockDisplacement& d) {
  const Point predicted = g.apply(d.center);
  return std::hypot(predicted.x - d.center.x - d.displacement.x,
                    predicted.y - d.center.y - d.displacement.y);
}

double median(std::vector<double> values) {
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  const double upper = values[mid];
  if (values.size() % 2 == 1) return upper;
  const double lower = *std::max_element(values.begin(), values.begin() + mid);
  return 0.5 * (lower + upper);
}

// The P-frames a causal window ending at t reads, newest first.
std::vector<std::size_t> causal_p_frames(std::span<const FrameFeatures> frames,
                                         std::size_t t, int count, bool by_index) {
  std::vector<std::size_t> out;
  for (std::size_t j = t + 1; j-- > 0;) {
    if (by_index && t - j >= static_cast<std::size_t>(count)) break;
    if (frames[j].type != FrameType::kP) continue;
    out.push_back(j);
    if (!by_index && out.size() == static_cast<std::size_t>(count)) break;
  }
  return out;
}

void require_p_frame(std::span<const FrameFeatures> frames, std::size_t t,
                     const char* model) {
  if (t >= frames.size()) throw Error(ErrorKind::kOutOfBounds, "frame index out of range");
  if (frames[t].type != FrameType::kP) {
    throw Error(ErrorKind::kInvalidParameter, std::string(model) + " scores P-frames only");
  }
}

}  // namespace

std::vector<BlockDisplacement> displacement_field(const FrameFeatures& frame) {
  std::vector<BlockDisplacement> field;
  for (int by = 0; by < frame.grid_h; ++by) {
    for (int bx = 0; bx < frame.grid_w; ++bx) {
      const BlockRecord& b = frame.block(bx, by);
      if (!b.mv) continue;
      field.push_back({block_center(frame, bx, by), {b.mv->dx / 4.0, b.mv->dy / 4.0}});
    }
  }
  return field;
}

GlobalMotionFit fit_global_motion(std::span<const BlockDisplacement> field) {
  GlobalMotionFit fit;
  for (const BlockDisplacement& d : field) {
    if (!std::isfinite(d.center.x) || !std::isfinite(d.center.y) ||
        !std::isfinite(d.displacement.x) || !std::isfinite(d.displacement.y)) {
      throw Error(ErrorKind::kInvalidParameter, "displacement field must be finite");
    }
  }
  if (field.size() < kMinGlobalMotionBlocks) {
    fit.fallback = true;
    return fit;
  }
  std::vector<std::size_t> use(field.size());
  for (std::size_t i = 0; i < use.size(); ++i) use[i] = i;
  fit.motion = fit_similarity(field, use);

  std::vector<double> r(field.size());
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i < field.size(); ++i) r[i] = residual(fit.motion, field[i]);
    const double threshold = std::max(2.0 * median(r), 1e-9);
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < field.size(); ++i) {
      if (r[i] <= threshold) keep.push_back(i);
    }
    if (keep.size() < kMinGlobalMotionBlocks) break;
    use = std::move(keep);
    fit.motion = fit_similarity(field, use);
  }
  fit.inliers = use.size();
  return fit;
}

GlobalMotionFit fit_global_motion(const FrameFeatures& frame) {
  const std::vector<BlockDisplacement> field = displacement_field(frame);
  return fit_global_motion(field);
}

Grid mvmag_blocks(const FrameFeatures& frame) {
  if (frame.type != FrameType::kP) {
    throw Error(ErrorKind::kInvalidParameter, "mvmag scores P-frames only");
  }
  Grid out(Dims{frame.grid_w, frame.grid_h});
  for (int by = 0; by < frame.grid_h; ++by) {
    for (int bx = 0; bx < frame.grid_w; ++bx) {
      const BlockRecord& b = frame.block(bx, by);
      if (b.mv) out(bx, by) = b.mv->magnitude_px();
    }
  }
  return out;
}

Grid pmes_blocks(std::span<const FrameFeatures> frames, std::size_t t,
                 const PmesParams& params) {
  if (params.window_s < 1 || params.window_t < 1) {
    throw Error(ErrorKind::kInvalidParameter, "pmes windows must be >= 1");
  }
  if (!(params.epsilon_px >= 0.0)) {
    throw Error(ErrorKind::kInvalidParameter, "pmes epsilon must be >= 0");
  }
  require_p_frame(frames, t, "pmes");
  const FrameFeatures& current = frames[t];
  const std::vector<std::size_t> window =
      causal_p_frames(frames, t, params.window_t, false);
  const int lo = -(params.window_s - 1) / 2;
  const int hi = params.window_s / 2;

  Grid out(Dims{current.grid_w, current.grid_h});
  std::vector<MotionVector> moving;
  for (int by = 0; by < current.grid_h; ++by) {
    for (int bx = 0; bx < current.grid_w; ++bx) {
      double magnitude_sum = 0.0;
      std::size_t count = 0;
      moving.clear();
      for (std::size_t j : window) {
        const FrameFeatures& f = frames[j];
        for (int oy = lo; oy <= hi; ++oy) {
          const int y = by + oy;
          if (y < 0 || y >= f.grid_h) continue;
          for (int ox = lo; ox <= hi; ++ox) {
            const int x = bx + ox;
            if (x < 0 || x >= f.grid_w) continue;
            const auto& mv = f.block(x, y).mv;
            if (!mv) continue;
            const double m = mv->magnitude_px();
            magnitude_sum += m;
            ++count;
            if (m > params.epsilon_px) moving.push_back(*mv);
          }
        }
      }
      if (moving.empty()) continue;
      // Parallel vectors have resultant length exactly 1.
      const MotionVector& ref = moving.front();
      const bool aligned = std::all_of(moving.begin(), moving.end(), [&](const MotionVector& v) {
        const long cross = static_cast<long>(v.dx) * ref.dy - static_cast<long>(v.dy) * ref.dx;
        const long dot = static_cast<long>(v.dx) * ref.dx + static_cast<long>(v.dy) * ref.dy;
        return cross == 0 && dot > 0;
      });
      if (aligned) continue;
      double cx = 0.0;
      double cy = 0.0;
      for (const MotionVector& v : moving) {
        const double len = std::hypot(static_cast<double>(v.dx), static_cast<double>(v.dy));
        cx += v.dx / len;
        cy += v.dy / len;
      }
      const double resultant =
          std::min(1.0, std::hypot(cx, cy) / static_cast<double>(moving.size()));
      out(bx, by) = magnitude_sum / static_cast<double>(count) * (1.0 - resultant);
    }
  }
  return out;
}

Grid csdct_blocks(const FrameFeatures& frame, const CsdctParams& params) {
  if (!(params.decay_px > 0.0) || !std::isfinite(params.decay_px)) {
    throw Error(ErrorKind::kInvalidParameter, "csdct decay must be > 0");
  }
  if (params.coefficients < 1) {
    throw Error(ErrorKind::kInvalidParameter, "csdct needs >= 1 coefficient");
  }
  const int gw = frame.grid_w;
  const int gh = frame.grid_h;
  const std::size_t k = static_cast<std::size_t>(params.coefficients);
  const std::size_t n = static_cast<std::size_t>(gw) * gh;
  std::vector<double> features(n * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::vector<int>& dct = frame.blocks[i].dct;
    for (std::size_t c = 0; c < std::min(k, dct.size()); ++c) {
      features[i * k + c] = dct[c];
    }
  }
  // Distance weights depend only on the block offset.
  std::vector<double> weight(n);
  for (int dy = 0; dy < gh; ++dy) {
    for (int dx = 0; dx < gw; ++dx) {
      const double d = frame.block_size * std::hypot(static_cast<double>(dx), static_cast<double>(dy));
      weight[static_cast<std::size_t>(dy) * gw + dx] = std::exp(-d / params.decay_px);
    }
  }
  std::vector<double> sum(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int ix = static_cast<int>(i % gw);
    const int iy = static_cast<int>(i / gw);
    const double* fi = &features[i * k];
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* fj = &features[j * k];
      double ss = 0.0;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = fi[c] - fj[c];
        ss += d * d;
      }
      if (ss == 0.0) continue;
      const int ox = std::abs(static_cast<int>(j % gw) - ix);
      const int oy = static_cast<int>(j / gw) - iy;
      const double term = std::sqrt(ss) * weight[static_cast<std::size_t>(oy) * gw + ox];
      sum[i] += term;
      sum[j] += term;
    }
  }
  return Grid(Dims{gw, gh}, std::move(sum));
}

Grid obdl_blocks(std::span<const FrameFeatures> frames, std::size_t t,
                 const ObdlParams& params) {
  if (params.temporal_smooth < 1) {
    throw Error(ErrorKind::kInvalidParameter, "obdl temporal_smooth must be >= 1");
  }
  require_p_frame(frames, t, "obdl");
  const FrameFeatures& current = frames[t];
  const std::vector<std::size_t> window =
      causal_p_frames(frames, t, params.temporal_smooth, true);
  Grid out(Dims{current.grid_w, current.grid_h});
  for (std::size_t j : window) {
    const FrameFeatures& f = frames[j];
    if (f.grid_w != current.grid_w || f.grid_h != current.grid_h) {
      throw Error(ErrorKind::kDimension, "block grid changes inside the obdl window");
    }
    const double area_scale = 256.0 / (static_cast<double>(f.block_size) * f.block_size);
    for (int by = 0; by < f.grid_h; ++by) {
      for (int bx = 0; bx < f.grid_w; ++bx) {
        out(bx, by) += static_cast<double>(f.block(bx, by).bits) * area_scale;
      }
    }
  }
  const double count = static_cast<double>(window.size());
  for (double& v : out.values()) v /= count;
  return out;
}

Grid gmc_residual_blocks(const FrameFeatures& frame) {
  if (frame.type != FrameType::kP) {
    throw Error(ErrorKind::kInvalidParameter, "gmc-mvmag scores P-frames only");
  }
  const GlobalMotionFit fit = fit_global_motion(frame);
  if (fit.fallback) return mvmag_blocks(frame);
  Grid out(Dims{frame.grid_w, frame.grid_h});
  for (int by = 0; by < frame.grid_h; ++by) {
    for (int bx = 0; bx < frame.grid_w; ++bx) {
      const auto& mv = frame.block(bx, by).mv;
      if (!mv) continue;
      const Point c = block_center(frame, bx, by);
      const Point g = fit.motion.apply(c);
      const double rx = std::round(4.0 * (mv->dx / 4.0 - (g.x - c.x)));
      const double ry = std::round(4.0 * (mv->dy / 4.0 - (g.y - c.y)));
      out(bx, by) = std::hypot(rx, ry) / 4.0;
    }
  }
  return out;
}

SaliencyMap model_gauss(Dims dims, const ViewingGeometry& geom, double map_scale) {
  geom.validate();
  const double sigma = degrees_to_map_pixels(geom, 1.0, map_scale);
  return gaussian_blob(dims, {pixel_center(dims.width / 2), pixel_center(dims.height / 2)},
                       sigma);
}

SaliencyMap io_map(std::span<const Point> points, Dims dims, double sigma_px) {
  if (points.empty()) return SaliencyMap::zeros(dims);
  Grid out(dims);
  for (const Point& p : points) {
    const SaliencyMap blob = gaussian_blob(dims, p, sigma_px);
    auto dst = out.values();
    auto src = blob.grid().values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(dst[i], src[i]);
  }
  return SaliencyMap(std::move(out));
}

std::vector<std::string> Model::check(const SequenceBundle&) const { return {}; }

namespace {

class Params {
 public:
  Params(std::string_view model, const nlohmann::json& node) : model_(model), node_(node) {
    if (!node_.is_null() && !node_.is_object()) {
      throw Error(ErrorKind::kConfig, model_ + ": model parameters must be an object");
    }
  }

  double real(const std::string& key, double fallback) {
    seen_.insert(key);
    if (node_.is_null() || !node_.contains(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number()) throw Error(ErrorKind::kConfig, model_ + "." + key + " must be a number");
    return v.get<double>();
  }

  int integer(const std::string& key, int fallback) {
    seen_.insert(key);
    if (node_.is_null() || !node_.contains(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_number_integer()) {
      throw Error(ErrorKind::kConfig, model_ + "." + key + " must be an integer");
    }
    return v.get<int>();
  }

  std::string text(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    if (node_.is_null() || !node_.contains(key)) return fallback;
    const auto& v = node_.at(key);
    if (!v.is_string()) throw Error(ErrorKind::kConfig, model_ + "." + key + " must be a string");
    return v.get<std::string>();
  }

  void finish() const {
    if (node_.is_null()) return;
    for (const auto& item : node_.items()) {
      if (!seen_.count(item.key())) {
        throw Error(ErrorKind::kConfig, "unknown parameter " + model_ + "." + item.key());
      }
    }
  }

 private:
  std::string model_;
  const nlohmann::json& node_;
  std::set<std::string> seen_;
};

void check_positive(double v, const std::string& what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kConfig, what + " must be > 0");
}

void check_nonnegative(double v, const std::string& what) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::kConfig, what + " must be >= 0");
}

constexpr double kDefaultSmoothPx = 4.0;

class GaussModel final : public Model {
 public:
  explicit GaussModel(double sigma_deg) : sigma_deg_(sigma_deg) {}
  std::string_view id() const override { return "gauss"; }
  bool covers(FrameType) const override { return true; }
  bool content_independent() const override { return true; }
  SaliencyMap predict(const SequenceBundle& bundle, std::size_t) const override {
    const Dims d = bundle.map_dims;
    return gaussian_blob(d, {pixel_center(d.width / 2), pixel_center(d.height / 2)},
                         bundle.degrees_to_pixels(sigma_deg_));
  }

 private:
  double sigma_deg_;
};

class IoModel final : public Model {
 public:
  IoModel(double sigma_deg, Viewing viewing) : sigma_deg_(sigma_deg), viewing_(viewing) {}
  std::string_view id() const override { return "io"; }
  bool covers(FrameType) const override { return true; }
  std::vector<std::string> check(const SequenceBundle& bundle) const override {
    if (!bundle.gaze.has_viewing(viewing_)) {
      throw Error(ErrorKind::kConfig, "io: sequence '" + bundle.sequence_id + "' has no " +
                                          std::string(to_string(viewing_)) + " viewing");
    }
    return {};
  }
  SaliencyMap predict(const SequenceBundle& bundle, std::size_t t) const override {
    const std::vector<Point> pts = bundle.map_gaze(bundle.frames.at(t).frame, viewing_);
    return io_map(pts, bundle.map_dims, bundle.degrees_to_pixels(sigma_deg_));
  }

 private:
  double sigma_deg_;
  Viewing viewing_;
};

// Block-level P-frame models share upsampling.
class BlockModel : public Model {
 public:
  explicit BlockModel(double smooth_px) : smooth_px_(smooth_px) {}
  bool covers(FrameType type) const override { return type == FrameType::kP; }
  SaliencyMap predict(const SequenceBundle& bundle, std::size_t t) const override {
    const Grid blocks = block_map(bundle.frames, t);
    return upsample_block_map(blocks, bundle.frames[t].block_size, bundle.map_dims,
                              smooth_px_);
  }

 protected:
  virtual Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const = 0;

 private:
  double smooth_px_;
};

class MvmagModel final : public BlockModel {
 public:
  using BlockModel::BlockModel;
  std::string_view id() const override { return "mvmag"; }

 protected:
  Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const override {
    return mvmag_blocks(frames[t]);
  }
};

class GmcModel final : public BlockModel {
 public:
  using BlockModel::BlockModel;
  std::string_view id() const override { return "gmc-mvmag"; }

 protected:
  Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const override {
    return gmc_residual_blocks(frames[t]);
  }
};

class PmesModel final : public BlockModel {
 public:
  PmesModel(double smooth_px, PmesParams params) : BlockModel(smooth_px), params_(params) {}
  std::string_view id() const override { return "pmes"; }

 protected:
  Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const override {
    return pmes_blocks(frames, t, params_);
  }

 private:
  PmesParams params_;
};

class ObdlModel final : public BlockModel {
 public:
  ObdlModel(double smooth_px, ObdlParams params) : BlockModel(smooth_px), params_(params) {}
  std::string_view id() const override { return "obdl"; }
  std::vector<std::string> check(const SequenceBundle& bundle) const override {
    for (const FrameFeatures& f : bundle.frames) {
      if (f.type != FrameType::kP) continue;
      for (const BlockRecord& b : f.blocks) {
        if (b.bits != 0) return {};
      }
    }
    return {"obdl: sequence '" + bundle.sequence_id +
            "' has zero bits in every P-frame; maps are all zero"};
  }

 protected:
  Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const override {
    return minmax_normalize(obdl_blocks(frames, t, params_));
  }

 private:
  ObdlParams params_;
};

class CsdctModel final : public BlockModel {
 public:
  CsdctModel(double smooth_px, CsdctParams params) : BlockModel(smooth_px), params_(params) {}
  std::string_view id() const override { return "csdct"; }
  bool covers(FrameType) const override { return true; }

 protected:
  Grid block_map(std::span<const FrameFeatures> frames, std::size_t t) const override {
    return minmax_normalize(csdct_blocks(frames[t], params_));
  }

 private:
  CsdctParams params_;
};

}  // namespace

const std::vector<std::string>& model_ids() {
  static const std::vector<std::string> ids = {"gauss", "io",   "mvmag",    "pmes",
                                               "csdct", "obdl", "gmc-mvmag"};
  return ids;
}

std::unique_ptr<Model> make_model(std::string_view id, const nlohmann::json& params) {
  Params p(id, params);
  std::unique_ptr<Model> model;
  if (id == "gauss") {
    const double sigma = p.real("sigma_deg", 1.0);
    check_positive(sigma, "gauss.sigma_deg");
    model = std::make_unique<GaussModel>(sigma);
  } else if (id == "io") {
    const double sigma = p.real("sigma_deg", 1.0);
    check_positive(sigma, "io.sigma_deg");
    const std::string viewing = p.text("viewing", "counterpart");
    const auto v = parse_viewing(viewing);
    if (!v) throw Error(ErrorKind::kConfig, "io.viewing: unknown viewing '" + viewing + "'");
    model = std::make_unique<IoModel>(sigma, *v);
  } else {
    const double smooth = p.real("smooth_sigma", kDefaultSmoothPx);
    check_nonnegative(smooth, std::string(id) + ".smooth_sigma");
    if (id == "mvmag") {
      model = std::make_unique<MvmagModel>(smooth);
    } else if (id == "gmc-mvmag") {
      model = std::make_unique<GmcModel>(smooth);
    } else if (id == "pmes") {
      PmesParams pp;
      pp.window_s = p.integer("window_s", pp.window_s);
      pp.window_t = p.integer("window_t", pp.window_t);
      pp.epsilon_px = p.real("epsilon_px", pp.epsilon_px);
      if (pp.window_s < 1 || pp.window_t < 1) {
        throw Error(ErrorKind::kConfig, "pmes windows must be >= 1");
      }
      check_nonnegative(pp.epsilon_px, "pmes.epsilon_px");
      model = std::make_unique<PmesModel>(smooth, pp);
    } else if (id == "csdct") {
      CsdctParams cp;
      cp.coefficients = p.integer("coefficients", cp.coefficients);
      cp.decay_px = p.real("decay_px", cp.decay_px);
      if (cp.coefficients < 1) throw Error(ErrorKind::kConfig, "csdct.coefficients must be >= 1");
      check_positive(cp.decay_px, "csdct.decay_px");
      model = std::make_unique<CsdctModel>(smooth, cp);
    } else if (id == "obdl") {
      ObdlParams op;
      op.temporal_smooth = p.integer("temporal_smooth", op.temporal_smooth);
      if (op.temporal_smooth < 1) {
        throw Error(ErrorKind::kConfig, "obdl.temporal_smooth must be >= 1");
      }
      model = std::make_unique<ObdlModel>(smooth, op);
    } else {
      throw Error(ErrorKind::kConfig, "unknown model '" + std::string(id) + "'");
    }
  }
  p.finish();
  return model;
}

ModelOutput run_model(const Model& model, const SequenceBundle& bundle) {
  ModelOutput out;
  out.model_id = std::string(model.id());
  out.scores_i = model.covers(FrameType::kI);
  out.scores_p = model.covers(FrameType::kP);
  out.warnings = model.check(bundle);
  out.maps.reserve(bundle.frames.size());
  for (std::size_t t = 0; t < bundle.frames.size(); ++t) {
    if (model.covers(bundle.frames[t].type)) {
      out.maps.emplace_back(model.predict(bundle, t));
    } else {
      out.maps.emplace_back(std::nullopt);
    }
  }
  return out;
}

}  // namespace cdsal
