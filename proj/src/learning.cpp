#include "cepnet/learning.hpp"

#include <cmath>
#include <iostream>
#include <map>
#include <numbers>
#include <numeric>

#include "csv_util.hpp"

namespace cep {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

ManifoldPoint start_point(const MuiObjective& obj, std::size_t index, const ForwardContext& ctx) {
  SeededRng rng(sample_seed(ctx.x0_seed, index));
  return initial_point(obj, rng, ctx.init);
}

// ---------------------------------------------------------------------------
// Reverse-mode sweep through the unrolled network.
//
// Adjoints follow the real inner product <a, b> = Re{a^H b}: for a complex
// intermediate z, zbar is defined by dL = <zbar, dz>. Complex-linear maps
// A therefore pull back through A^H, and the tangent projection is
// self-adjoint for fixed x.

struct UnitTape {
  ComplexVec x;  // x_k
  ComplexVec e;  // Euclidean gradient at x_k
  ComplexVec g;  // Riemannian gradient at x_k
  ComplexVec d;  // direction d_k actually stepped along
  ComplexVec p;  // P_{x_k}(d_{k-1})
  ComplexVec q;  // P_{x_k}(g_{k-1})
  double beta = 0.0;
  double num = 0.0;
  double den = 0.0;
  bool guarded = true;
};

// Pullback of z -> P_x(z) = z - Nt Re{z conj(x)} x with respect to x:
//   xbar += -Nt ( Re{conj(zbar) x} z + Re{conj(z) x} zbar ).
void accumulate_projection_x_adjoint(const ComplexVec& x, const ComplexVec& z, const ComplexVec& zbar, ComplexVec& xbar) {
  const double nt = static_cast<double>(x.size());
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double a = zbar[n].real() * x[n].real() + zbar[n].imag() * x[n].imag();
    const double b = z[n].real() * x[n].real() + z[n].imag() * x[n].imag();
    xbar[n] -= nt * (a * z[n] + b * zbar[n]);
  }
}

ComplexVec project(const ComplexVec& x, const ComplexVec& z) {
  return project_to_tangent(ManifoldPoint::unchecked(x), z).z;
}

}  // namespace

LossAndGradient sample_residual_gradient(const CepnetParams& params, const MuiObjective& obj, const ManifoldPoint& x0) {
  params.validate();
  require(x0.size() == obj.antennas(), "sample_residual_gradient: x0 length must equal H.cols");
  const std::size_t units = params.units();
  const std::size_t nt = obj.antennas();
  const ComplexMat& h = obj.channel();

  // Forward, mirroring cepnet_forward operation for operation.
  std::vector<UnitTape> tape(units);
  ManifoldPoint x = x0;
  for (std::size_t k = 0; k < units; ++k) {
    UnitTape& t = tape[k];
    Evaluation ev = evaluate(obj, x);
    t.x = x.vec();
    t.e = std::move(ev.euclidean);
    t.g = ev.riemannian.z;
    if (k == 0) {
      t.d = ComplexVec(nt);
      for (std::size_t n = 0; n < nt; ++n) t.d[n] = -t.g[n];
    } else {
      const UnitTape& prev = tape[k - 1];
      const TangentVector g_prev{prev.g};
      const TangentVector q = project_to_tangent(x, prev.g);
      const TangentVector p = project_to_tangent(x, prev.d);
      t.beta = polak_ribiere(ev.riemannian, q, g_prev);
      t.den = kernel::real_inner(prev.g.span(), prev.g.span());
      t.guarded = t.den < kBetaDenominatorFloor;
      if (!t.guarded) {
        double num = 0.0;
        for (std::size_t n = 0; n < nt; ++n) {
          const cplx diff = t.g[n] - q.z[n];
          num += t.g[n].real() * diff.real() + t.g[n].imag() * diff.imag();
        }
        t.num = num;
      }
      t.d = cg_direction(ev.riemannian, params.w_beta[k] * t.beta, p);
      t.p = p.z;
      t.q = q.z;
    }
    x = retract_scaled(x, params.w_alpha[k], t.d);
  }

  // Output residual and its pullback.
  const Evaluation last = evaluate(obj, x);
  LossAndGradient out;
  out.loss_db = last.value;
  out.grad.assign(2 * units, 0.0);
  double* g_alpha = out.grad.data();
  double* g_beta = out.grad.data() + units;

  const double radius = 1.0 / std::sqrt(static_cast<double>(nt));
  ComplexVec xbar = last.euclidean;  // df/dx_K
  ComplexVec dbar(nt);               // from later units, adjoint of d_k
  ComplexVec gbar(nt);               // from later units, adjoint of g_k
  ComplexVec ubar(nt), ebar(nt), pbar(nt), qbar(nt), hv(obj.users()), hhv(nt);

  for (std::size_t kk = units; kk-- > 0;) {
    const UnitTape& t = tape[kk];
    const double wa = params.w_alpha[kk];

    // x_{k+1} = retract(x_k + wa d_k)
    ComplexVec xk_bar(nt);
    for (std::size_t n = 0; n < nt; ++n) {
      const cplx u = t.x[n] + wa * t.d[n];
      const double mag = std::abs(u);
      if (mag <= kRetractKeepPhaseBelow) {
        ubar[n] = 0.0;
        xk_bar[n] = xbar[n];
        continue;
      }
      const cplx uhat = u / mag;
      const double radial = xbar[n].real() * uhat.real() + xbar[n].imag() * uhat.imag();
      ubar[n] = (radius / mag) * (xbar[n] - radial * uhat);
      xk_bar[n] = ubar[n];
    }
    g_alpha[kk] += kernel::real_inner(ubar.span(), t.d.span());
    for (std::size_t n = 0; n < nt; ++n) dbar[n] += wa * ubar[n];

    // d_k = -g_k + (w_beta beta) p_k
    ComplexVec g_k_bar(nt);
    for (std::size_t n = 0; n < nt; ++n) g_k_bar[n] = gbar[n] - dbar[n];
    ComplexVec dprev_bar(nt);
    ComplexVec gprev_bar(nt);
    if (kk > 0) {
      const UnitTape& prev = tape[kk - 1];
      const double wb = params.w_beta[kk];
      const double coef = wb * t.beta;
      const double cbar = kernel::real_inner(dbar.span(), t.p.span());
      g_beta[kk] += t.beta * cbar;
      for (std::size_t n = 0; n < nt; ++n) pbar[n] = coef * dbar[n];
      for (std::size_t n = 0; n < nt; ++n) qbar[n] = 0.0;
      if (!t.guarded) {
        const double beta_bar = wb * cbar;
        const double num_bar = beta_bar / t.den;
        const double den_bar = -beta_bar * t.num / (t.den * t.den);
        for (std::size_t n = 0; n < nt; ++n) {
          g_k_bar[n] += num_bar * (2.0 * t.g[n] - t.q[n]);
          qbar[n] = -num_bar * t.g[n];
          gprev_bar[n] += 2.0 * den_bar * prev.g[n];
        }
      }
      // p_k = P_{x_k}(d_{k-1}), q_k = P_{x_k}(g_{k-1})
      dprev_bar = project(t.x, pbar);
      accumulate_projection_x_adjoint(t.x, prev.d, pbar, xk_bar);
      const ComplexVec q_pull = project(t.x, qbar);
      for (std::size_t n = 0; n < nt; ++n) gprev_bar[n] += q_pull[n];
      accumulate_projection_x_adjoint(t.x, prev.g, qbar, xk_bar);
    }

    // g_k = P_{x_k}(e_k)
    ebar = project(t.x, g_k_bar);
    accumulate_projection_x_adjoint(t.x, t.e, g_k_bar, xk_bar);

    // e_k = 2 H^H (H x_k - s)
    kernel::matvec(h, ebar.span(), hv.span());
    kernel::matvec_adjoint(h, hv.span(), hhv.span());
    for (std::size_t n = 0; n < nt; ++n) xk_bar[n] += 2.0 * hhv[n];

    xbar = std::move(xk_bar);
    dbar = std::move(dprev_bar);
    gbar = std::move(gprev_bar);
  }
  return out;
}

double mean_residual_db(std::span<const double> residual_sq, std::size_t users) {
  require(!residual_sq.empty(), "loss: batch must be nonempty");
  require(users >= 1, "loss: users must be positive");
  double total = 0.0;
  for (double r : residual_sq) total += r;
  if (total == 0.0) return kLossDbFloor;
  return 10.0 * std::log10(total / (static_cast<double>(residual_sq.size()) * static_cast<double>(users)));
}

std::vector<double> cepnet_residuals(const CepnetParams& params, const Dataset& data,
                                     std::span<const std::size_t> indices, const ForwardContext& ctx) {
  params.validate();
  std::vector<double> res(indices.size());
  parallel_for(indices.size(), ctx.threads, [&](std::size_t j) {
    const std::size_t i = indices[j];
    require(i < data.size(), "loss: sample index out of range");
    const Sample& smp = data.samples[i];
    const MuiObjective obj(smp.h, smp.s);
    res[j] = cepnet_forward(obj, start_point(obj, i, ctx), params).trace.final_mui;
  });
  return res;
}

double loss_db(const CepnetParams& params, const Dataset& data, std::span<const std::size_t> indices,
               const ForwardContext& ctx) {
  require(!data.empty(), "loss: dataset must be nonempty");
  if (indices.empty()) return loss_db(params, data, ctx);
  const auto res = cepnet_residuals(params, data, indices, ctx);
  return mean_residual_db(res, data.samples[indices[0]].s.size());
}

double loss_db(const CepnetParams& params, const Dataset& data, const ForwardContext& ctx) {
  require(!data.empty(), "loss: dataset must be nonempty");
  const auto idx = all_indices(data);
  return loss_db(params, data, idx, ctx);
}

std::vector<double> grad_params_fd(const CepnetParams& params, const Dataset& data,
                                   std::span<const std::size_t> indices, const ForwardContext& ctx, double fd_step) {
  require(fd_step > 0.0 && std::isfinite(fd_step), "grad_params_fd: fd_step must be positive");
  const std::vector<double> theta = params.flat();
  std::vector<double> grad(theta.size());
  for (std::size_t j = 0; j < theta.size(); ++j) {
    std::vector<double> plus = theta, minus = theta;
    plus[j] += fd_step;
    minus[j] -= fd_step;
    const double lp = loss_db(CepnetParams::from_flat(plus), data, indices, ctx);
    const double lm = loss_db(CepnetParams::from_flat(minus), data, indices, ctx);
    grad[j] = (lp - lm) / (2.0 * fd_step);
  }
  return grad;
}

LossAndGradient grad_params_adjoint(const CepnetParams& params, const Dataset& data,
                                    std::span<const std::size_t> indices, const ForwardContext& ctx) {
  require(!data.empty(), "grad_params_adjoint: dataset must be nonempty");
  std::vector<std::size_t> owned;
  if (indices.empty()) {
    owned = all_indices(data);
    indices = owned;
  }
  std::vector<LossAndGradient> per(indices.size());
  parallel_for(indices.size(), ctx.threads, [&](std::size_t j) {
    const std::size_t i = indices[j];
    require(i < data.size(), "grad_params_adjoint: sample index out of range");
    const Sample& smp = data.samples[i];
    const MuiObjective obj(smp.h, smp.s);
    per[j] = sample_residual_gradient(params, obj, start_point(obj, i, ctx));
  });

  std::vector<double> residuals(per.size());
  std::vector<double> sum(params.count(), 0.0);
  for (std::size_t j = 0; j < per.size(); ++j) {
    residuals[j] = per[j].loss_db;
    for (std::size_t p = 0; p < sum.size(); ++p) sum[p] += per[j].grad[p];
  }
  LossAndGradient out;
  out.loss_db = mean_residual_db(residuals, data.samples[indices[0]].s.size());
  const double total = std::accumulate(residuals.begin(), residuals.end(), 0.0);
  out.grad.assign(sum.size(), 0.0);
  if (total > 0.0) {
    const double scale = 10.0 / (std::numbers::ln10 * total);
    for (std::size_t p = 0; p < sum.size(); ++p) out.grad[p] = scale * sum[p];
  }
  return out;
}

void AdamConfig::validate() const {
  require(beta1 > 0.0 && beta1 < 1.0, "adam: beta1 must lie in (0,1)");
  require(beta2 > 0.0 && beta2 < 1.0, "adam: beta2 must lie in (0,1)");
  require(eps > 0.0, "adam: eps must be positive");
}

AdamStep adam_update(const AdamState& state, const CepnetParams& params, std::span<const double> grad, double lr,
                     const AdamConfig& cfg) {
  cfg.validate();
  const std::size_t n = params.count();
  require(grad.size() == n, "adam_update: gradient length must equal 2K");
  require(state.m.size() == n && state.v.size() == n, "adam_update: state size must equal 2K");
  for (double g : grad) {
    if (!std::isfinite(g)) {
      std::clog << "adam_update: non-finite gradient entry, update skipped at step " << state.t + 1 << '\n';
      return {state, params, true};
    }
  }
  AdamStep out{state, params, false};
  AdamState& s = out.state;
  s.t += 1;
  const double t = static_cast<double>(s.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  std::vector<double> theta = params.flat();
  for (std::size_t j = 0; j < n; ++j) {
    s.m[j] = cfg.beta1 * s.m[j] + (1.0 - cfg.beta1) * grad[j];
    s.v[j] = cfg.beta2 * s.v[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
    const double m_hat = s.m[j] / c1;
    const double v_hat = s.v[j] / c2;
    theta[j] -= lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  out.params = CepnetParams::from_flat(theta);
  return out;
}

std::string to_string(GradientMethod m) { return m == GradientMethod::Adjoint ? "adjoint" : "finite_difference"; }

GradientMethod parse_gradient_method(const std::string& s) {
  if (s == "adjoint") return GradientMethod::Adjoint;
  if (s == "finite_difference") return GradientMethod::FiniteDifference;
  throw ContractError("unknown gradient method '" + s + "' (expected adjoint or finite_difference)");
}

void TrainConfig::validate(std::size_t train_size) const {
  require(units >= 1, "train: K must be at least 1");
  require(epochs >= 0, "train: epochs must be nonnegative");
  require(learning_rate > 0.0 && std::isfinite(learning_rate), "train: learning_rate must be positive");
  require(batch_size >= 1, "train: batch_size must be positive");
  require(batch_size <= train_size, "train: batch_size (" + std::to_string(batch_size) +
                                        ") exceeds training-set size (" + std::to_string(train_size) + ")");
  adam.validate();
  require(fd_step > 0.0, "train: fd_step must be positive");
  require(alpha_init_low <= alpha_init_high, "train: alpha init range is inverted");
  require(divergence_db > 0.0, "train: divergence_db must be positive");
}

CepnetParams initialize_params(const TrainConfig& cfg) {
  SeededRng rng = SeededRng::derive(cfg.seed, 0x1417);
  std::vector<double> alpha(static_cast<std::size_t>(cfg.units));
  for (double& a : alpha) a = rng.uniform(cfg.alpha_init_low, cfg.alpha_init_high);
  return CepnetParams(std::move(alpha), std::vector<double>(static_cast<std::size_t>(cfg.units), 1.0));
}

TrainResult train(const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg,
                  const std::optional<CepnetParams>& start,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  require(!train_set.empty() && !val_set.empty(), "train: datasets must be nonempty");
  cfg.validate(train_set.size());
  CepnetParams params = start ? *start : initialize_params(cfg);
  require(static_cast<int>(params.units()) == cfg.units,
          "train: starting parameters have K=" + std::to_string(params.units()) + " but config K=" +
              std::to_string(cfg.units));

  const ForwardContext ctx{cfg.init, cfg.seed, cfg.threads};
  TrainResult result;
  result.initial_train_db = loss_db(params, train_set, ctx);
  result.initial_val_db = loss_db(params, val_set, ctx);
  result.best = params;
  double best_val = result.initial_val_db;

  AdamState adam = AdamState::zeros(params.count());
  std::vector<std::size_t> order = all_indices(train_set);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    SeededRng shuffle = SeededRng::derive(mix_seed(cfg.seed, 0x5348), static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch + 1;
    double batch_loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      LossAndGradient lg;
      if (cfg.gradient == GradientMethod::Adjoint) {
        lg = grad_params_adjoint(params, train_set, batch, ctx);
      } else {
        lg.loss_db = loss_db(params, train_set, batch, ctx);
        lg.grad = grad_params_fd(params, train_set, batch, ctx, cfg.fd_step);
      }
      batch_loss_sum += lg.loss_db;
      ++batches;
      AdamStep step = adam_update(adam, params, lg.grad, cfg.learning_rate, cfg.adam);
      if (step.rejected) ++rec.rejected_updates;
      adam = std::move(step.state);
      params = std::move(step.params);
    }
    rec.train_batch_mean_db = batch_loss_sum / static_cast<double>(batches);
    rec.train_epoch_db = loss_db(params, train_set, ctx);
    if (!(rec.train_epoch_db <= result.initial_train_db + cfg.divergence_db)) {
      throw TrainingDiverged("train: epoch " + std::to_string(rec.epoch) + " training loss " +
                             csv::fixed(rec.train_epoch_db, 3) + " dB exceeds initial " +
                             csv::fixed(result.initial_train_db, 3) + " dB by more than " +
                             csv::fixed(cfg.divergence_db, 1) + " dB");
    }
    rec.val_db = loss_db(params, val_set, ctx);
    if (rec.val_db < best_val) {
      best_val = rec.val_db;
      result.best = params;
    }
    rec.best_val_db = best_val;
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  result.last = params;
  return result;
}

std::string params_csv(const CepnetParams& params, const ParamsFileHeader& header) {
  params.validate();
  std::string out;
  out += "format_version," + std::to_string(header.format_version) + "\n";
  out += "K," + std::to_string(params.units()) + "\n";
  out += "x0_policy," + to_string(header.init) + "\n";
  out += "seed," + std::to_string(header.seed) + "\n";
  out += "k,w_alpha,w_beta\n";
  for (std::size_t k = 0; k < params.units(); ++k)
    out += std::to_string(k) + "," + csv::sci(params.w_alpha[k]) + "," + csv::sci(params.w_beta[k]) + "\n";
  return out;
}

void write_params_csv(const std::filesystem::path& path, const CepnetParams& params, const ParamsFileHeader& header) {
  csv::write_atomic(path, params_csv(params, header));
}

CepnetParams read_params_csv(const std::filesystem::path& path, ParamsFileHeader* header) {
  auto in = csv::open_in(path);
  const std::string where = path.string();
  std::map<std::string, std::string> kv;
  std::string line;
  for (int i = 0; i < 4; ++i) {
    if (!std::getline(in, line)) throw IoError(where + ": truncated header");
    const auto f = csv::split(line);
    if (f.size() != 2) throw IoError(where + ": malformed header row '" + line + "'");
    kv[f[0]] = f[1];
  }
  for (const char* key : {"format_version", "K", "x0_policy", "seed"})
    if (!kv.count(key)) throw IoError(where + ": missing header key '" + std::string(key) + "'");
  ParamsFileHeader h;
  h.format_version = static_cast<int>(csv::to_u64(kv["format_version"], where));
  if (h.format_version != ParamsFileHeader::kFormatVersion)
    throw IoError(where + ": unsupported format_version " + kv["format_version"]);
  h.init = parse_init_policy(kv["x0_policy"]);
  h.seed = csv::to_u64(kv["seed"], where);
  const std::size_t units = csv::to_u64(kv["K"], where);
  if (!std::getline(in, line) || csv::split(line) != std::vector<std::string>{"k", "w_alpha", "w_beta"})
    throw IoError(where + ": expected column header 'k,w_alpha,w_beta'");
  std::vector<double> alpha, beta;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 3) throw IoError(where + ": malformed parameter row '" + line + "'");
    if (csv::to_u64(f[0], where) != alpha.size()) throw IoError(where + ": unit index out of sequence");
    alpha.push_back(csv::to_double(f[1], where));
    beta.push_back(csv::to_double(f[2], where));
  }
  if (alpha.size() != units)
    throw IoError(where + ": header says K=" + std::to_string(units) + " but file has " + std::to_string(alpha.size()) +
                  " rows");
  if (header) *header = h;
  return CepnetParams(std::move(alpha), std::move(beta));
}

std::string history_csv(const TrainResult& result) {
  std::string out = "epoch,train_batch_mean_db,train_epoch_db,val_db,best_val_db,rejected_updates\n";
  for (const auto& r : result.history) {
    out += std::to_string(r.epoch) + "," + csv::sci(r.train_batch_mean_db) + "," + csv::sci(r.train_epoch_db) + "," +
           csv::sci(r.val_db) + "," + csv::sci(r.best_val_db) + "," + std::to_string(r.rejected_updates) + "\n";
  }
  return out;
}

}  // namespace cep
