#include "planeforge/renderer.hpp"

#include <cmath>
#include <numbers>

namespace planeforge {

void BoundedPlane::validate() const {
  params.validate();
  boundary.validate();
  color.validate();
  if (boundary.input_dim() != 1 || boundary.output_dim() != 1) throw ShapeError("boundary MLP must map theta to r");
  if (color.input_dim() != 2 || color.output_dim() != 3) throw ShapeError("color MLP must map (theta, r) to RGB");
  Eigen::MatrixXd probe(1, 64);
  for (int i = 0; i < 64; ++i) probe(0, i) = 2 * std::numbers::pi * i / 64.0;
  if (!(boundary.forward(probe).array() > 0).all()) throw InvariantError("boundary must be positive");
}

void RefineConfig::validate() const {
  if (!(beta > 0)) throw ConfigError("beta must be positive");
  if (iterations < 1) throw ConfigError("iteration budget must be at least 1");
  if (lr_plane < 0 || lr_boundary < 0 || lr_color < 0) throw ConfigError("learning rates must be non-negative");
  if (!(lr_floor > 0 && lr_floor <= 1)) throw ConfigError("lr_floor must be in (0, 1]");
}

namespace {

struct PixelGeom {
  Eigen::Index pixel;
  Vec3d dir;
  double t;
  double denom;
  Vec3d pi;
  Vec3d u;
  double x, y, r, theta;
};

// Nearest-hit selection; fills ids/t when given and returns per-plane pixel lists.
std::vector<std::vector<PixelGeom>> select_planes(const std::vector<BoundedPlane>& planes, const Camera& view,
                                                  std::vector<int>* ids, Eigen::VectorXd* tbuf) {
  std::vector<std::vector<PixelGeom>> out(planes.size());
  const Eigen::Index n = view.pixel_count();
  if (ids) ids->assign(static_cast<std::size_t>(n), -1);
  if (tbuf) tbuf->setConstant(n, std::numeric_limits<double>::infinity());
  for (int py = 0; py < view.height; ++py) {
    for (int px = 0; px < view.width; ++px) {
      const Rayd ray = pixel_to_ray(view, Vec2d(px, py));
      int best = -1;
      Hit<double> best_hit;
      best_hit.t = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < planes.size(); ++i) {
        const Hit<double> h = try_intersect(ray, planes[i].params);
        if (!h.valid()) continue;
        if (h.t < best_hit.t || (h.t == best_hit.t && planes[i].id < planes[static_cast<std::size_t>(best)].id)) {
          best_hit = h;
          best = static_cast<int>(i);
        }
      }
      if (best < 0) continue;
      const Eigen::Index idx = view.index(px, py);
      const Plane& p = planes[static_cast<std::size_t>(best)].params;
      PixelGeom g;
      g.pixel = idx;
      g.dir = ray.direction;
      g.t = best_hit.t;
      g.denom = ray.direction.dot(p.normal);
      g.pi = best_hit.point;
      g.u = g.pi - p.center;
      g.x = g.u.dot(p.axis);
      g.y = g.u.dot(p.second_axis());
      g.r = g.u.norm();
      g.theta = g.r == 0 ? 0.0 : wrap_angle(std::atan2(g.y, g.x));
      out[static_cast<std::size_t>(best)].push_back(g);
      if (ids) (*ids)[static_cast<std::size_t>(idx)] = planes[static_cast<std::size_t>(best)].id;
      if (tbuf) (*tbuf)[idx] = best_hit.t;
    }
  }
  return out;
}

double sigmoid(double z) { return detail::sigmoid(z); }

// Shades one view into `rgb`; with a target, returns the squared-error sum and
// accumulates gradients scaled by `norm` (= 1 / (3 * total pixels)).
double shade_view(const std::vector<BoundedPlane>& planes, const Camera& view, double beta, const Vec3d& bg,
                  Eigen::Matrix3Xd& rgb, const Eigen::Matrix3Xd* target, double norm, LossGradients* grads,
                  std::vector<int>* ids, Eigen::VectorXd* tbuf) {
  const auto sel = select_planes(planes, view, ids, tbuf);
  rgb.resize(3, view.pixel_count());
  rgb.colwise() = bg;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const auto& px = sel[k];
    if (px.empty()) continue;
    const BoundedPlane& bp = planes[k];
    const Eigen::Index n = static_cast<Eigen::Index>(px.size());
    Eigen::MatrixXd th(1, n), tr(2, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& g = px[static_cast<std::size_t>(j)];
      th(0, j) = g.theta;
      tr(0, j) = g.theta;
      tr(1, j) = g.r;
    }
    Tape btape, ctape;
    const Eigen::MatrixXd fb = grads ? btape.record(bp.boundary, th) : bp.boundary.forward(th);
    const Eigen::MatrixXd c = grads ? ctape.record(bp.color, tr) : bp.color.forward(tr);
    Eigen::RowVectorXd gate(n);
    for (Eigen::Index j = 0; j < n; ++j) gate[j] = sigmoid(beta * (fb(0, j) - tr(1, j)));
    for (Eigen::Index j = 0; j < n; ++j)
      rgb.col(px[static_cast<std::size_t>(j)].pixel) = c.col(j) * gate[j] + bg * (1 - gate[j]);
    if (!grads) continue;

    // e = dL/d out for every channel of this plane's pixels.
    Eigen::Matrix3Xd e(3, n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::Index p = px[static_cast<std::size_t>(j)].pixel;
      e.col(j) = 2 * norm * (rgb.col(p) - target->col(p));
    }
    const Eigen::MatrixXd up_color = e.array().rowwise() * gate.array();
    Eigen::RowVectorXd dgate(n);
    for (Eigen::Index j = 0; j < n; ++j) dgate[j] = e.col(j).dot(c.col(j) - bg);
    const Eigen::RowVectorXd gprime = (gate.array() * (1 - gate.array())).matrix() * beta;
    const Eigen::MatrixXd up_boundary = (dgate.array() * gprime.array()).matrix();

    const MlpGrad gc = ctape.backward(up_color);
    const MlpGrad gb = btape.backward(up_boundary);
    PlaneGradient& pg = grads->planes[k];
    pg.color += gc.flat();
    pg.boundary += gb.flat();

    const Plane& P = bp.params;
    const Vec3d A = P.axis;
    const Vec3d B = P.second_axis();
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto& g = px[static_cast<std::size_t>(j)];
      const double d_r = gc.inputs(1, j) - up_boundary(0, j);
      const double d_theta = gc.inputs(0, j) + gb.inputs(0, j);
      Vec3d d_u = Vec3d::Zero();
      double d_y = 0;
      if (g.r > 0) d_u += d_r * g.u / g.r;
      const double rho2 = g.x * g.x + g.y * g.y;
      if (rho2 > 0) {
        const double d_x = d_theta * (-g.y / rho2);
        d_y = d_theta * (g.x / rho2);
        d_u += d_x * A + d_y * B;
      }
      pg.center -= d_u;
      const double d_t = d_u.dot(g.dir);
      pg.offset += -d_t / g.denom;
      pg.normal_raw += -d_t * g.pi / g.denom + d_y * A.cross(g.u);
    }
  }
  if (!target) return 0.0;
  return (rgb - *target).squaredNorm();
}

Eigen::Index total_pixels(const std::vector<Camera>& views) {
  if (views.empty()) throw ShapeError("render loss needs at least one view");
  Eigen::Index total = 0;
  for (const auto& v : views) {
    if (v.pixels.cols() != v.pixel_count()) throw ShapeError("target raster does not match the view size");
    total += v.pixel_count();
  }
  return total;
}

}  // namespace

RenderedImage render(const std::vector<BoundedPlane>& planes, const Camera& view, double beta,
                     const Vec3d& background) {
  RenderedImage img;
  img.width = view.width;
  img.height = view.height;
  shade_view(planes, view, beta, background, img.rgb, nullptr, 0, nullptr, &img.ids, &img.t);
  return img;
}

double render_loss(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views, double beta,
                   const Vec3d& background) {
  const Eigen::Index total = total_pixels(views);
  double sum = 0;
  Eigen::Matrix3Xd rgb;
  for (const auto& v : views) sum += shade_view(planes, v, beta, background, rgb, &v.pixels, 0, nullptr, nullptr, nullptr);
  return sum / double(3 * total);
}

LossGradients render_loss_gradients(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                                    double beta, const Vec3d& background) {
  const Eigen::Index total = total_pixels(views);
  const double norm = 1.0 / double(3 * total);
  LossGradients out;
  out.planes.resize(planes.size());
  for (std::size_t k = 0; k < planes.size(); ++k) {
    out.planes[k].boundary = Eigen::VectorXd::Zero(planes[k].boundary.parameter_count());
    out.planes[k].color = Eigen::VectorXd::Zero(planes[k].color.parameter_count());
  }
  double sum = 0;
  Eigen::Matrix3Xd rgb;
  for (const auto& v : views) sum += shade_view(planes, v, beta, background, rgb, &v.pixels, norm, &out, nullptr, nullptr);
  out.loss = sum * norm;
  for (std::size_t k = 0; k < planes.size(); ++k) {
    const Vec3d& N = planes[k].params.normal;
    auto& g = out.planes[k];
    g.normal = g.normal_raw - g.normal_raw.dot(N) * N;
  }
  return out;
}

namespace {

struct PlaneOptState {
  AdamState geom;  // tangent normal (3) + offset (1)
  AdamState boundary;
  AdamState color;
};

}  // namespace

RefineResult refine(const std::vector<BoundedPlane>& planes, const std::vector<Camera>& views,
                    const RefineConfig& cfg) {
  cfg.validate();
  for (const auto& p : planes) p.validate();

  std::vector<BoundedPlane> cur = planes;
  std::vector<PlaneOptState> opt;
  for (const auto& p : cur)
    opt.push_back({AdamState(4), AdamState(p.boundary.parameter_count()), AdamState(p.color.parameter_count())});

  RefineResult res;
  res.planes = cur;
  res.best_loss = std::numeric_limits<double>::infinity();
  for (int it = 0; it <= cfg.iterations; ++it) {
    LossGradients lg = render_loss_gradients(cur, views, cfg.beta, cfg.background);
    if (!std::isfinite(lg.loss)) throw RefineDivergedError(res.planes, res.trace);
    res.trace.push_back(lg.loss);
    if (lg.loss < res.best_loss) {
      res.best_loss = lg.loss;
      res.best_iteration = it;
      res.planes = cur;
    }
    res.best_so_far.push_back(res.best_loss);
    if (it == cfg.iterations) break;

    const double decay =
        cfg.optimizer == Optimizer::kAdam ? 1.0 - (1.0 - cfg.lr_floor) * double(it) / double(cfg.iterations) : 1.0;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      BoundedPlane& bp = cur[k];
      const PlaneGradient& g = lg.planes[k];
      Plane& P = bp.params;
      // The center follows the plane along N, so its gradient folds into N and d.
      const double gd = g.offset - g.center.dot(P.normal);
      Vec3d gn = g.normal_raw - P.center * P.normal.dot(g.center);
      gn -= gn.dot(P.normal) * P.normal;

      Eigen::Vector4d geo;
      geo << gn, gd;
      Eigen::Vector4d step;
      Eigen::VectorXd sb, sc;
      if (cfg.optimizer == Optimizer::kAdam) {
        step = opt[k].geom.step(geo, cfg.lr_plane * decay);
        sb = opt[k].boundary.step(g.boundary, cfg.lr_boundary * decay);
        sc = opt[k].color.step(g.color, cfg.lr_color * decay);
      } else {
        step = -cfg.lr_plane * geo;
        sb = -cfg.lr_boundary * g.boundary;
        sc = -cfg.lr_color * g.color;
      }
      if (cfg.lr_boundary > 0) bp.boundary.set_parameters(bp.boundary.parameters() + sb);
      if (cfg.lr_color > 0) bp.color.set_parameters(bp.color.parameters() + sc);

      const Vec3d n_new = (P.normal + step.head<3>()).normalized();
      const double d_new = P.offset + step[3];
      const Vec3d c_new = P.center - (P.center.dot(n_new) + d_new) * n_new;
      Vec3d a_new = P.axis - P.axis.dot(n_new) * n_new;
      if (a_new.norm() < 1e-9) throw DegenerateAxis("refinement rotated the axis onto the normal");
      P.normal = n_new;
      P.center = c_new;
      P.offset = -c_new.dot(n_new);
      P.axis = a_new.normalized();
    }
  }
  return res;
}

}  // namespace planeforge
