#include "ncfilter/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "ncfilter/detail/kernels.hpp"

namespace ncfilter {

using detail::Comps;
using detail::ModelOps;
using detail::Quad;

std::vector<double> MeasurementRecord::jump_times() const {
  std::vector<double> out;
  out.reserve(jump_steps.size());
  for (int n : jump_steps) out.push_back(grid.t(n));
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Envelope values on the grid nodes, shared read-only by all workers.
struct Tables {
  std::vector<cplx> xi;
  std::vector<double> tail;
  std::vector<std::vector<cplx>> alpha;  // [node][component]

  Tables(const FieldState& fs, const TimeGrid& grid) {
    const auto nodes = static_cast<std::size_t>(grid.steps) + 1;
    if (fs.is_photon()) {
      const Envelope& e = fs.photon().xi;
      xi.resize(nodes);
      tail.resize(nodes);
      for (std::size_t n = 0; n < nodes; ++n) {
        xi[n] = e(grid.t(static_cast<int>(n)));
        tail[n] = e.tail_integral(grid.t(static_cast<int>(n)));
      }
    } else {
      const auto& al = fs.coherent().alphas;
      alpha.assign(nodes, std::vector<cplx>(al.size()));
      for (std::size_t n = 0; n < nodes; ++n)
        for (std::size_t i = 0; i < al.size(); ++i)
          alpha[n][i] = al[i](grid.t(static_cast<int>(n)));
    }
  }
};

template <class Mat>
struct PhotonKernel {
  using State = Quad<Mat>;
  const ModelOps<Mat>& ops;
  const Tables& tab;
  double dt;

  State init(const FilterState& f) const {
    return {Mat(f[0]), Mat(f[1]), Mat(f[2]), Mat(f[3])};
  }
  double k(const State& x, int n) const {
    return detail::photon_intensity_raw(ops, x, tab.xi[n]).real();
  }
  double v(const State& x, int n) const {
    return detail::photon_vt_raw(ops, x, tab.xi[n]).real();
  }
  double count(State& x, int n, bool jump, double k) const {
    const auto ts = detail::tail_step(tab.tail[n], tab.tail[n + 1], kTailEps);
    return detail::photon_counting_step(ops, x, tab.xi[n], ts, dt, jump, k);
  }
  double hom(State& x, int n, double dW, double v) const {
    const auto ts = detail::tail_step(tab.tail[n], tab.tail[n + 1], kTailEps);
    return detail::photon_homodyne_step(ops, x, tab.xi[n], ts, dt, dW, v);
  }
  const Mat& rho(const State& x) const { return x.S; }
  FilterState to_filter(const State& x) const {
    return FilterState(HierarchyState{
        Layout::cascade, {Operator(x.S), Operator(x.M), Operator(x.P), Operator(x.Q)}});
  }
};

template <class Mat>
struct CoherentKernel {
  using State = Comps<Mat>;
  const ModelOps<Mat>& ops;
  const Tables& tab;
  double dt;

  State init(const FilterState& f) const {
    State s;
    for (const auto& m : f.mats) s.emplace_back(m);
    return s;
  }
  double k(const State& x, int n) const {
    return detail::coherent_intensity_raw(ops, x, tab.alpha[n]).real();
  }
  double v(const State& x, int n) const {
    return detail::coherent_vt_raw(ops, x, tab.alpha[n]).real();
  }
  double count(State& x, int n, bool jump, double k) const {
    return detail::coherent_counting_step(ops, x, tab.alpha[n], dt, jump, k);
  }
  double hom(State& x, int n, double dW, double v) const {
    return detail::coherent_homodyne_step(ops, x, tab.alpha[n], dt, dW, v);
  }
  Mat rho(const State& x) const {
    Mat s = x[0];
    for (std::size_t i = 1; i < x.size(); ++i) s += x[i];
    return s;
  }
  FilterState to_filter(const State& x) const {
    HierarchyState h{Layout::coherent, {}};
    for (const auto& m : x) h.mats.emplace_back(m);
    return FilterState(std::move(h));
  }
};

struct RunInfo {
  long clamp_count = 0;
  bool coarse_dt = false;
  int counts = 0;
};

// Runs one trajectory, reporting every node and record entry to the sink:
//   sink.node(n, p_exc, rate, cumulative, rho_S)
//   sink.jump(n)
//   sink.increment(n, dY, dW)
template <class Kernel, class Sink>
RunInfo run_one(const Kernel& ker, const FilterState& f0, const TimeGrid& grid,
                Scheme scheme, std::uint64_t seed,
                const TrajectoryOptions& opts, Sink& sink,
                typename Kernel::State* final_state = nullptr) {
  RunInfo info;
  auto x = ker.init(f0);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(grid.dt));
  const MeasurementRecord* replay = opts.replay;
  std::size_t next_jump = 0;
  double cum = 0.0;
  const int d = static_cast<int>(ker.rho(x).rows());

  for (int n = 0;; ++n) {
    double r;
    if (scheme == Scheme::counting) {
      r = ker.k(x, n);
      if (r < 0.0) {
        // plain roundoff is not worth a warning
        if (r < -kExactTol) ++info.clamp_count;
        r = 0.0;
      }
    } else {
      r = ker.v(x, n);
    }
    const auto rho = ker.rho(x);
    sink.node(n, rho(d - 1, d - 1).real(), r, cum, rho);
    if (opts.observer) opts.observer(n, ker.to_filter(x));
    if (n == grid.steps) break;

    const double t = grid.t(n);
    double tr;
    if (scheme == Scheme::counting) {
      bool jump;
      if (replay) {
        jump = next_jump < replay->jump_steps.size() &&
               replay->jump_steps[next_jump] == n;
        if (jump) ++next_jump;
      } else {
        const double u = uniform01(gen);
        jump = r >= kJumpThreshold && u < r * grid.dt;
      }
      if (jump && r < kJumpThreshold) {
        std::ostringstream msg;
        msg << "jump at vanishing intensity (k_t = " << r << ", t = " << t << ")";
        fail(ErrorCode::numeric, msg.str());
      }
      if (r * grid.dt > 0.1) info.coarse_dt = true;
      tr = ker.count(x, n, jump, r);
      if (jump) {
        cum += 1.0;
        ++info.counts;
        sink.jump(n);
      }
    } else {
      const double dW = replay ? replay->dY[static_cast<std::size_t>(n)] - r * grid.dt
                               : normal(gen);
      const double dY = r * grid.dt + dW;
      cum += dY;
      sink.increment(n, dY, dW);
      tr = ker.hom(x, n, dW, r);
    }
    if (!(tr > 0.0) || !std::isfinite(tr)) {
      std::ostringstream msg;
      msg << "trajectory: state became invalid in step " << n << " (t = " << t
          << ")";
      fail(ErrorCode::numeric, msg.str());
    }
  }
  if (final_state) *final_state = std::move(x);
  return info;
}

struct VectorSink {
  TrajectoryResult& res;

  template <class M>
  void node(int, double p, double r, double c, const M&) {
    res.p_exc.push_back(p);
    res.rate.push_back(r);
    res.cumulative.push_back(c);
  }
  void jump(int n) { res.record.jump_steps.push_back(n); }
  void increment(int, double dY, double) { res.record.dY.push_back(dY); }
};

void check_replay(const MeasurementRecord* rec, Scheme scheme,
                  const TimeGrid& grid) {
  if (!rec) return;
  if (rec->scheme != scheme)
    fail(ErrorCode::invalid_argument, "replay record has the wrong scheme");
  if (rec->grid.steps != grid.steps || rec->grid.dt != grid.dt)
    fail(ErrorCode::invalid_argument, "replay record grid differs");
  if (scheme == Scheme::homodyne &&
      rec->dY.size() != static_cast<std::size_t>(grid.steps))
    fail(ErrorCode::invalid_argument, "replay record has the wrong length");
  if (scheme == Scheme::counting) {
    for (std::size_t i = 0; i < rec->jump_steps.size(); ++i) {
      const int n = rec->jump_steps[i];
      if (n < 0 || n >= grid.steps || (i && n <= rec->jump_steps[i - 1]))
        fail(ErrorCode::invalid_argument,
             "replay jump steps must be increasing and inside the grid");
    }
  }
}

void check_inputs(const SystemModel& model, const Operator& rho0,
                  const FieldState& fs) {
  if (rho0.rows() != model.dim() || rho0.cols() != model.dim())
    fail(ErrorCode::invalid_argument, "initial state and model dimensions differ");
  if (fs.is_coherent() && fs.coherent().weights.empty())
    fail(ErrorCode::invalid_argument, "coherent mixture without components");
}

template <class Mat, class Fn>
auto with_kernel(const SystemModel& model, const FieldState& fs,
                 const Tables& tab, double dt, Fn&& fn) {
  const ModelOps<Mat> ops(model);
  if (fs.is_photon()) return fn(PhotonKernel<Mat>{ops, tab, dt});
  return fn(CoherentKernel<Mat>{ops, tab, dt});
}

template <class Fn>
auto dispatch(const SystemModel& model, const FieldState& fs, const Tables& tab,
              double dt, Fn&& fn) {
  if (model.dim() == 2)
    return with_kernel<Eigen::Matrix2cd>(model, fs, tab, dt, std::forward<Fn>(fn));
  return with_kernel<Operator>(model, fs, tab, dt, std::forward<Fn>(fn));
}

TrajectoryResult simulate(const SystemModel& model, const FieldState& fs,
                          const Operator& rho0, const TimeGrid& grid,
                          std::uint64_t seed, const TrajectoryOptions& opts,
                          Scheme scheme) {
  check_inputs(model, rho0, fs);
  check_replay(opts.replay, scheme, grid);
  const Tables tab(fs, grid);
  const FilterState f0 = initial_filter_state(rho0, fs);
  TrajectoryResult res;
  res.seed = seed;
  res.record.scheme = scheme;
  res.record.grid = grid;
  const auto nodes = static_cast<std::size_t>(grid.steps) + 1;
  res.p_exc.reserve(nodes);
  res.rate.reserve(nodes);
  res.cumulative.reserve(nodes);
  if (scheme == Scheme::homodyne) res.record.dY.reserve(nodes);
  VectorSink sink{res};
  dispatch(model, fs, tab, grid.dt, [&](const auto& ker) {
    typename std::decay_t<decltype(ker)>::State xf;
    const RunInfo info = run_one(ker, f0, grid, scheme, seed, opts, sink, &xf);
    res.clamp_count = info.clamp_count;
    res.coarse_dt = info.coarse_dt;
    res.final_state = ker.to_filter(xf);
    return 0;
  });
  return res;
}

// ---- order-independent reduction ---------------------------------------------
//
// Sums are kept in 128-bit fixed point (2^-52 resolution), so the result of
// adding trajectories is exact and independent of the order in which workers
// finish.

using Fixed = __int128;
constexpr double kFixedLimit = 1048576.0;  // 2^20

Fixed to_fixed(double y) {
  if (std::abs(y) < 2048.0)
    return static_cast<Fixed>(std::llrint(y * 0x1.0p52));
  const double hi = std::floor(y);
  const double lo = y - hi;  // exact, in [0, 1)
  return (static_cast<Fixed>(static_cast<long long>(hi)) << 52) +
         static_cast<Fixed>(std::llround(std::ldexp(lo, 52)));
}

long double from_fixed(Fixed f) {
  return std::ldexp(static_cast<long double>(f), -52);
}

struct Accum {
  std::vector<Fixed> sum, sq;
  void resize(std::size_t n) {
    sum.assign(n, 0);
    sq.assign(n, 0);
  }
  void add(std::size_t i, double x) {
    if (!(std::abs(x) < kFixedLimit))
      fail(ErrorCode::numeric, "ensemble observable out of accumulator range");
    sum[i] += to_fixed(x);
    sq[i] += to_fixed(x * x);
  }
  void merge(const Accum& o) {
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sq[i] += o.sq[i];
    }
  }
};

// Series layout: 0 p_exc, 1 rate, 2 cumulative, 3 at-least-one,
// then 2 d^2 entries (re, im interleaved per matrix entry).
struct AccumSink {
  std::size_t nodes;
  int d;
  Accum acc;
  Accum dw;  // index 0
  long dw_n = 0;
  bool seen_count = false;

  AccumSink(std::size_t nodes_, int d_) : nodes(nodes_), d(d_) {
    acc.resize(nodes * (4 + 2 * static_cast<std::size_t>(d) * d));
    dw.resize(1);
  }
  void start() { seen_count = false; }

  template <class M>
  void node(int n, double p, double r, double c, const M& rho) {
    const auto i = static_cast<std::size_t>(n);
    acc.add(0 * nodes + i, p);
    acc.add(1 * nodes + i, r);
    acc.add(2 * nodes + i, c);
    acc.add(3 * nodes + i, seen_count ? 1.0 : 0.0);
    std::size_t s = 4;
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) {
        acc.add(s++ * nodes + i, rho(a, b).real());
        acc.add(s++ * nodes + i, rho(a, b).imag());
      }
  }
  void jump(int) { seen_count = true; }
  void increment(int, double, double dW) {
    dw.add(0, dW);
    ++dw_n;
  }
};

SeriesStats finish(const Accum& acc, std::size_t series, std::size_t nodes,
                   int M) {
  SeriesStats out;
  out.mean.resize(nodes);
  out.stderr_.resize(nodes);
  for (std::size_t n = 0; n < nodes; ++n) {
    const long double s = from_fixed(acc.sum[series * nodes + n]);
    const long double q = from_fixed(acc.sq[series * nodes + n]);
    const long double mean = s / M;
    long double var = 0.0L;
    if (M > 1) var = std::max(0.0L, (q - M * mean * mean) / (M - 1));
    out.mean[n] = static_cast<double>(mean);
    out.stderr_[n] = static_cast<double>(std::sqrt(var / M));
  }
  return out;
}

}  // namespace

TrajectoryResult simulate_counting(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   const TrajectoryOptions& opts) {
  return simulate(model, fs, rho0, grid, seed, opts, Scheme::counting);
}

TrajectoryResult simulate_homodyne(const SystemModel& model,
                                   const FieldState& fs, const Operator& rho0,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   const TrajectoryOptions& opts) {
  return simulate(model, fs, rho0, grid, seed, opts, Scheme::homodyne);
}

std::uint64_t trajectory_seed(std::uint64_t master_seed, std::uint64_t index) {
  return splitmix64(master_seed ^ splitmix64(index));
}

Operator EnsembleStats::mean_rho(int n) const {
  const int d = static_cast<int>(std::lround(std::sqrt(rho_re.size())));
  Operator out(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b)
      out(a, b) = cplx(rho_re[a * d + b].mean[n], rho_im[a * d + b].mean[n]);
  return out;
}

int default_thread_count() {
  if (const char* env = std::getenv("NCFILTER_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleStats run_ensemble(const SystemModel& model, const FieldState& fs,
                           const Operator& rho0, const TimeGrid& grid,
                           Scheme scheme, int M, std::uint64_t master_seed,
                           int threads) {
  if (M < 1) fail(ErrorCode::invalid_argument, "ensemble: M must be >= 1");
  check_inputs(model, rho0, fs);
  const Tables tab(fs, grid);
  const FilterState f0 = initial_filter_state(rho0, fs);
  const auto nodes = static_cast<std::size_t>(grid.steps) + 1;
  const int d = model.dim();

  if (threads <= 0) threads = default_thread_count();
  threads = std::max(1, std::min(threads, M));

  EnsembleStats st;
  st.scheme = scheme;
  st.grid = grid;
  st.M = M;
  st.master_seed = master_seed;
  st.total_counts.assign(static_cast<std::size_t>(M), 0);

  std::atomic<int> next{0};
  std::vector<AccumSink> sinks;
  sinks.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) sinks.emplace_back(nodes, d);
  std::vector<long> clamps(static_cast<std::size_t>(threads), 0);
  std::vector<char> coarse(static_cast<std::size_t>(threads), 0);
  std::exception_ptr error;
  std::mutex error_mutex;

  auto worker = [&](int w) {
    try {
      AccumSink& sink = sinks[static_cast<std::size_t>(w)];
      dispatch(model, fs, tab, grid.dt, [&](const auto& ker) {
        for (int m; (m = next.fetch_add(1)) < M;) {
          sink.start();
          const RunInfo info = run_one(ker, f0, grid, scheme,
                                       trajectory_seed(master_seed, m), {}, sink);
          st.total_counts[static_cast<std::size_t>(m)] = info.counts;
          clamps[static_cast<std::size_t>(w)] += info.clamp_count;
          if (info.coarse_dt) coarse[static_cast<std::size_t>(w)] = 1;
        }
        return 0;
      });
    } catch (...) {
      std::lock_guard<std::mutex> lock(error_mutex);
      if (!error) error = std::current_exception();
      next.store(M);
    }
  };

  if (threads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(worker, w);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);

  AccumSink& total = sinks[0];
  for (int w = 1; w < threads; ++w) {
    total.acc.merge(sinks[static_cast<std::size_t>(w)].acc);
    total.dw.merge(sinks[static_cast<std::size_t>(w)].dw);
    total.dw_n += sinks[static_cast<std::size_t>(w)].dw_n;
  }
  for (int w = 0; w < threads; ++w) {
    st.clamp_count += clamps[static_cast<std::size_t>(w)];
    st.coarse_dt = st.coarse_dt || coarse[static_cast<std::size_t>(w)];
  }

  st.p_exc = finish(total.acc, 0, nodes, M);
  st.rate = finish(total.acc, 1, nodes, M);
  st.cumulative = finish(total.acc, 2, nodes, M);
  if (scheme == Scheme::counting) st.atleast_one = finish(total.acc, 3, nodes, M);
  std::size_t s = 4;
  for (int e = 0; e < d * d; ++e) {
    st.rho_re.push_back(finish(total.acc, s++, nodes, M));
    st.rho_im.push_back(finish(total.acc, s++, nodes, M));
  }
  if (scheme == Scheme::homodyne) {
    st.dw_samples = total.dw_n;
    if (total.dw_n > 1) {
      const long double n = static_cast<long double>(total.dw_n);
      const long double mean = from_fixed(total.dw.sum[0]) / n;
      const long double q = from_fixed(total.dw.sq[0]);
      st.dw_mean = static_cast<double>(mean);
      st.dw_var = static_cast<double>((q - n * mean * mean) / (n - 1));
    }
  } else {
    st.total_counts.shrink_to_fit();
  }
  return st;
}

namespace {

std::vector<double> histogram(const std::vector<int>& counts) {
  if (counts.empty())
    fail(ErrorCode::invalid_argument, "count distribution of an empty ensemble");
  const int top = *std::max_element(counts.begin(), counts.end());
  std::vector<double> h(static_cast<std::size_t>(top) + 1, 0.0);
  for (int c : counts) h[static_cast<std::size_t>(c)] += 1.0;
  for (double& v : h) v /= static_cast<double>(counts.size());
  return h;
}

}  // namespace

std::vector<double> empirical_count_distribution(
    const std::vector<TrajectoryResult>& results) {
  std::vector<int> counts;
  for (const auto& r : results) {
    if (r.record.scheme != Scheme::counting)
      fail(ErrorCode::invalid_argument,
           "count distribution needs counting trajectories");
    counts.push_back(static_cast<int>(r.record.jump_steps.size()));
  }
  return histogram(counts);
}

std::vector<double> empirical_count_distribution(const EnsembleStats& stats) {
  if (stats.scheme != Scheme::counting)
    fail(ErrorCode::invalid_argument,
         "count distribution needs counting trajectories");
  return histogram(stats.total_counts);
}

}  // namespace ncfilter
