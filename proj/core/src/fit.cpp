#include "voxtrack/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxtrack/errors.hpp"
#include "voxtrack/random.hpp"
#include "voxtrack/render.hpp"
#include "field_internal.hpp"

namespace voxtrack {

namespace {

struct Ray {
  Vec3 origin;
  Vec3 dir;
  Vec3 target;
  double offset;  // jitter, fraction of a step
};

struct Sample {
  double t;
  detail::GridCoord g;
  bool has_object;
  double sigma_b, sigma_o, sigma;
  Vec3 c_b, c_o, c;
  double alpha, transmittance;
};

struct Activated {
  std::vector<detail::NodeValue> nodes;
  std::vector<float> d_density;    // softplus'
  std::vector<float> d_color[3];   // sigmoid'
};

Activated activate(const VoxelField& f) {
  Activated a;
  const size_t n = f.node_count();
  a.nodes.resize(n);
  a.d_density.resize(n);
  for (auto& c : a.d_color) c.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const float pre = f.density_preact()[i];
    a.nodes[i].density = activate_density(pre);
    a.d_density[i] = float(1.0 / (1.0 + std::exp(-double(pre))));
    float* rgb[3] = {&a.nodes[i].r, &a.nodes[i].g, &a.nodes[i].b};
    for (int c = 0; c < 3; ++c) {
      const float s = activate_color(f.color_preact(c)[i]);
      *rgb[c] = s;
      a.d_color[c][i] = s * (1.0f - s);
    }
  }
  return a;
}

// Rays that can touch the object box; the rest have a fixed error that is
// folded in once as a constant.
struct RaySet {
  std::vector<Ray> rays;
  size_t total = 0;
  double fixed_loss = 0.0;  // summed squared error of the rays that miss the object
};

struct Pass {
  double loss = 0.0;
  std::vector<float> grad_density;
  std::vector<float> grad_color[3];
};

// Loss (and optionally gradient w.r.t. object pre-activations) over all rays.
Pass evaluate(const std::vector<Ray>& rays, const FieldSampler& bg, const VoxelField& object,
              double step, const FitOptions& opt, bool with_grad, double norm) {
  const Activated act = activate(object);
  const Aabb obox = object.bbox();
  const GridSize res = object.resolution();
  Pass pass;
  if (with_grad) {
    pass.grad_density.assign(object.node_count(), 0.0f);
    for (auto& g : pass.grad_color) g.assign(object.node_count(), 0.0f);
  }
  std::vector<Sample> samples;
  double loss = 0.0;
  for (const Ray& ray : rays) {
    samples.clear();
    double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
    const auto ho = obox.intersect(ray.origin, ray.dir);
    const auto hb = bg.bbox().intersect(ray.origin, ray.dir);
    if (ho) t0 = std::min(t0, ho->first), t1 = std::max(t1, ho->second);
    if (hb) t0 = std::min(t0, hb->first), t1 = std::max(t1, hb->second);
    t0 = std::max(t0, opt.near);
    t1 = std::min(t1, opt.far);
    Vec3 color = Vec3::Zero();
    // Same sample grid as the renderer, shifted by the ray's jitter.
    const long first = long(std::ceil(t0 / step - ray.offset - 1e-9));
    const long last = long(std::floor(t1 / step - ray.offset + 1e-9));
    if (t0 <= t1 && first <= last) {
      double transmittance = 1.0;
      for (long i = first; i <= last; ++i) {
        const double t = (double(i) + ray.offset) * step;
        const Vec3 x = ray.origin + t * ray.dir;
        Sample s;
        s.t = t;
        s.has_object = detail::grid_coord(obox, res, x, s.g);
        FieldSample so;
        if (s.has_object)
          so = detail::trilinear(s.g, res, [&act](size_t idx) { return act.nodes[idx]; });
        const FieldSample sb = bg.sample(x);
        const FieldSample comp = compose_sample(sb.density, sb.color, so.density, so.color);
        if (!(comp.density > 0.0)) continue;
        s.sigma_b = sb.density;
        s.sigma_o = so.density;
        s.c_b = sb.color;
        s.c_o = so.color;
        s.sigma = comp.density;
        s.c = comp.color;
        s.alpha = 1.0 - std::exp(-s.sigma * step);
        s.transmittance = transmittance;
        color += transmittance * s.alpha * s.c;
        samples.push_back(s);
        transmittance *= 1.0 - s.alpha;
        if (transmittance < 1e-10) break;
      }
    }
    const Vec3 err = color - ray.target;
    loss += err.squaredNorm();
    if (!with_grad) continue;
    const Vec3 dl_dc = 2.0 * norm * err;
    Vec3 suffix = Vec3::Zero();
    for (auto it = samples.rbegin(); it != samples.rend(); ++it) {
      const Sample& s = *it;
      const double w = s.transmittance * s.alpha;
      const double t_next = s.transmittance * (1.0 - s.alpha);
      const double g_sigma = dl_dc.dot(step * (t_next * s.c - suffix));
      const Vec3 g_c = w * dl_dc;
      suffix += w * s.c;
      if (!s.has_object) continue;
      double g_so = g_sigma;
      Vec3 g_co = g_c;
      if (s.sigma > 1e-12) {
        g_so += g_c.dot((s.sigma_b / (s.sigma * s.sigma)) * (s.c_o - s.c_b));
        g_co = g_c * (s.sigma_o / s.sigma);
      }
      const size_t sy = size_t(res.nx), sz = size_t(res.nx) * res.ny;
      const size_t base = size_t(s.g.k) * sz + size_t(s.g.j) * sy + size_t(s.g.i);
      const double wx[2] = {1.0 - s.g.fx, s.g.fx};
      const double wy[2] = {1.0 - s.g.fy, s.g.fy};
      const double wz[2] = {1.0 - s.g.fz, s.g.fz};
      for (int c = 0; c < 2; ++c)
        for (int b = 0; b < 2; ++b)
          for (int a = 0; a < 2; ++a) {
            const double wn = wx[a] * wy[b] * wz[c];
            const size_t idx = base + a + b * sy + c * sz;
            pass.grad_density[idx] += float(wn * act.d_density[idx] * g_so);
            for (int ch = 0; ch < 3; ++ch)
              pass.grad_color[ch][idx] += float(wn * act.d_color[ch][idx] * g_co[ch]);
          }
    }
  }
  pass.loss = loss;
  return pass;
}

RaySet make_rays(const std::vector<TrainingView>& views, const FitOptions& opt, const FieldSampler& bg,
                 const VoxelField& object, double step) {
  RaySet set;
  std::vector<Ray> missing;
  Rng rng(mix_seed(opt.seed, 17));
  for (const auto& v : views) {
    const Mat3 r_t = v.pose.rotation_matrix().transpose();
    const Vec3 origin = v.pose.camera_center();
    for (int y = 0; y < v.camera.height; ++y)
      for (int x = 0; x < v.camera.width; ++x) {
        const float* p = v.image.px(x, y);
        const Vec3 dir = (r_t * v.camera.ray_direction(Vec2(x, y))).normalized();
        Ray ray{origin, dir, Vec3(p[0], p[1], p[2]), opt.jitter ? rng.uniform() : 0.0};
        const auto hit = object.bbox().intersect(origin, dir);
        if (hit && hit->second >= opt.near && hit->first <= opt.far) set.rays.push_back(ray);
        else missing.push_back(ray);
      }
  }
  set.total = set.rays.size() + missing.size();
  set.fixed_loss = evaluate(missing, bg, object, step, opt, false, 0.0).loss;
  return set;
}

double loss_norm(const RaySet& set) { return 1.0 / (3.0 * double(set.total)); }

double resolve_step(const VoxelField& object, const FitOptions& opt) {
  return opt.step > 0.0 ? opt.step : 0.5 * object.voxel_size().minCoeff();
}

}  // namespace

double composed_loss(const std::vector<TrainingView>& views, const VoxelField& background,
                     const VoxelField& object, const FitOptions& options) {
  const FieldSampler bg(background);
  const double step = resolve_step(object, options);
  const RaySet set = make_rays(views, options, bg, object, step);
  const double norm = loss_norm(set);
  return (set.fixed_loss + evaluate(set.rays, bg, object, step, options, false, norm).loss) * norm;
}

FitResult fit_difference_field(const std::vector<TrainingView>& views, const VoxelField& background,
                               const VoxelField& init, const FitOptions& options) {
  if (views.size() < 8) throw Error(ErrorCode::InvalidConfig, "fitting needs at least 8 posed views");
  FitResult result{init, 0.0, 0.0, {}, 0, 0};
  if (options.iterations <= 0) {
    result.initial_loss = result.final_loss = composed_loss(views, background, init, options);
    result.loss_trace.push_back(result.initial_loss);
    return result;
  }
  const FieldSampler bg(background);
  const double step = resolve_step(init, options);
  const RaySet set = make_rays(views, options, bg, init, step);
  const double norm = loss_norm(set);
  auto run = [&](const VoxelField& f) {
    Pass p = evaluate(set.rays, bg, f, step, options, true, norm);
    p.loss = (p.loss + set.fixed_loss) * norm;
    return p;
  };

  VoxelField current = init;
  Pass here = run(current);
  if (!std::isfinite(here.loss)) throw NonFiniteLossError(0, "initial loss is not finite");
  result.initial_loss = here.loss;
  result.loss_trace.push_back(here.loss);

  const size_t n = current.node_count();
  // Per-pixel mean loss gives gradients far below the usual 1e-8 floor.
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-14;
  // Parameter block p: 0 = density, 1..3 = color channels.
  std::vector<float> m[4], v[4];
  for (int p = 0; p < 4; ++p) m[p].assign(n, 0.0f), v[p].assign(n, 0.0f);
  auto params = [&current](int p) -> std::vector<float>& {
    return p == 0 ? current.density_preact() : current.color_preact(p - 1);
  };
  auto grads = [](Pass& pass, int p) -> std::vector<float>& {
    return p == 0 ? pass.grad_density : pass.grad_color[p - 1];
  };

  double lr = options.learning_rate;
  int adam_t = 0;
  for (int iter = 1; iter <= options.iterations; ++iter) {
    const int t = adam_t + 1;
    const double bc1 = 1.0 - std::pow(kBeta1, t);
    const double bc2 = 1.0 - std::pow(kBeta2, t);
    VoxelField trial = current;
    std::vector<float> m_new[4], v_new[4];
    for (int p = 0; p < 4; ++p) {
      const std::vector<float>& g = grads(here, p);
      m_new[p].resize(n);
      v_new[p].resize(n);
      std::vector<float>& dst = p == 0 ? trial.density_preact() : trial.color_preact(p - 1);
      const std::vector<float>& src = params(p);
      for (size_t i = 0; i < n; ++i) {
        m_new[p][i] = float(kBeta1 * m[p][i] + (1.0 - kBeta1) * g[i]);
        v_new[p][i] = float(kBeta2 * v[p][i] + (1.0 - kBeta2) * double(g[i]) * g[i]);
        const double mh = m_new[p][i] / bc1;
        const double vh = v_new[p][i] / bc2;
        dst[i] = float(src[i] - lr * mh / (std::sqrt(vh) + kEps));
      }
    }
    Pass next = run(trial);
    if (!std::isfinite(next.loss)) throw NonFiniteLossError(iter, "loss became non-finite");
    if (next.loss <= here.loss) {
      current = std::move(trial);
      here = std::move(next);
      for (int p = 0; p < 4; ++p) m[p] = std::move(m_new[p]), v[p] = std::move(v_new[p]);
      adam_t = t;
      ++result.accepted;
      result.loss_trace.push_back(here.loss);
    } else {
      ++result.rejected;
      lr *= 0.5;
    }
  }
  result.final_loss = here.loss;
  result.field = std::move(current);
  return result;
}

}  // namespace voxtrack
