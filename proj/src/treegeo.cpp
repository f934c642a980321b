#include "ultralog/treegeo.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ultralog/util.hpp"

namespace ultralog {

namespace {

std::vector<Poly> polys_up_to(const Field& f, int d) {
  std::vector<Poly> out;
  const unsigned s = f.size();
  std::vector<Elem> c(static_cast<std::size_t>(d + 1), 0);
  while (true) {
    out.emplace_back(f, c);
    std::size_t i = 0;
    while (i < c.size() && ++c[i] == s) c[i++] = 0;
    if (i == c.size()) break;
  }
  return out;
}

// g = [[a, b], [c, d]] fixes [O + X^j O]
bool fixes(const Poly& a, const Poly& b, const Poly& c, const Poly& d, int j) {
  return a.degree() <= 0 && d.degree() <= 0 && (b.is_zero() || b.degree() + j <= 0) && c.degree() <= j;
}

}  // namespace

StabilizerCount stabilizer_order_oracle(const Field& f, int j, int degree_bound, bool edge, std::uint64_t cap) {
  if (j < 0 || degree_bound < 0) throw std::invalid_argument("stabilizer oracle: negative level or bound");
  const double triples = std::pow(static_cast<double>(f.size()), 3.0 * (degree_bound + 1));
  if (triples > static_cast<double>(cap)) throw std::length_error("stabilizer oracle: search exceeds cap");
  const auto P = polys_up_to(f, degree_bound);
  const Poly one = Poly::constant(f, 1);
  StabilizerCount out;
  out.certified = degree_bound >= j + (edge ? 1 : 0);
  auto accept = [&](const Poly& a, const Poly& b, const Poly& c, const Poly& d) {
    return fixes(a, b, c, d, j) && (!edge || fixes(a, b, c, d, j + 1));
  };
  for (const auto& a : P)
    for (const auto& b : P)
      for (const auto& c : P) {
        ++out.examined;
        if (a.is_zero()) {
          if (!(b * c + one).is_zero()) continue;
          for (const auto& d : P) out.order += accept(a, b, c, d);
          continue;
        }
        auto [d, rem] = divmod(one + b * c, a);
        if (!rem.is_zero() || d.degree() > degree_bound) continue;
        out.order += accept(a, b, c, d);
      }
  return out;
}

double vertex_stabilizer_order(unsigned q, int j) {
  const double Q = q;
  return j == 0 ? Q * (Q * Q - 1) : (Q - 1) * std::pow(Q, j + 1);
}

double edge_stabilizer_order(unsigned q, int j) { return (q - 1.0) * std::pow(static_cast<double>(q), j + 1); }

int QuotientRay::up(int j) const { return j <= j_max ? up_index[static_cast<std::size_t>(j)] : 1; }
int QuotientRay::down(int j) const {
  return j <= j_max ? down_index[static_cast<std::size_t>(j)] : static_cast<int>(q);
}

double QuotientRay::cusp_mass(int r) const {
  if (r <= 0) return 1.0;
  if (r > j_max) return tail_mass * std::pow(static_cast<double>(q), -(r - j_max - 1));
  double m = tail_mass;
  for (int j = j_max; j >= r; --j) m += masses[static_cast<std::size_t>(j)];
  return m;
}

QuotientRay quotient_ray(const Field& f, int j_max, int oracle_max) {
  if (j_max < 2) throw std::invalid_argument("quotient_ray: j_max must be >= 2");
  const unsigned q = f.size();
  if (oracle_max < 0) oracle_max = q == 2 ? 5 : q == 3 ? 3 : q <= 5 ? 2 : 1;
  oracle_max = std::min(oracle_max, j_max);
  QuotientRay ray;
  ray.q = q;
  ray.j_max = j_max;
  ray.oracle_max = oracle_max;
  for (int j = 0; j <= j_max; ++j) {
    double v = vertex_stabilizer_order(q, j), e = edge_stabilizer_order(q, j);
    if (j <= oracle_max) {
      const auto vo = stabilizer_order_oracle(f, j, j);
      if (!vo.certified || static_cast<double>(vo.order) != v)
        throw std::logic_error("stabilizer order of v_" + std::to_string(j) + ": enumeration gives " +
                               std::to_string(vo.order) + ", closed form " + std::to_string(v));
      if (j < oracle_max) {
        const auto eo = stabilizer_order_oracle(f, j, j + 1, true);
        if (!eo.certified || static_cast<double>(eo.order) != e)
          throw std::logic_error("edge stabilizer at v_" + std::to_string(j) + ": enumeration gives " +
                                 std::to_string(eo.order) + ", closed form " + std::to_string(e));
      }
    }
    ray.orders.push_back(v);
    ray.edge_orders.push_back(e);
  }
  // sum_{j > j_max} 1 / ((q-1) q^{j+1})
  const double Q = q;
  const double tail = std::pow(Q, -(j_max + 1)) / ((Q - 1) * (Q - 1));
  double z = tail;
  for (double o : ray.orders) z += 1 / o;
  for (double o : ray.orders) ray.masses.push_back(1 / o / z);
  ray.tail_mass = tail / z;
  for (int j = 0; j <= j_max; ++j) {
    const double up = ray.orders[static_cast<std::size_t>(j)] / ray.edge_orders[static_cast<std::size_t>(j)];
    const double down = j == 0 ? 0 : ray.orders[static_cast<std::size_t>(j)] / ray.edge_orders[static_cast<std::size_t>(j - 1)];
    if (std::fabs(up - std::round(up)) > 1e-9 || std::fabs(down - std::round(down)) > 1e-9)
      throw std::logic_error("non-integral edge index");
    ray.up_index.push_back(static_cast<int>(std::lround(up)));
    ray.down_index.push_back(static_cast<int>(std::lround(down)));
  }
  double slope = 0;
  for (int r = 1; r < j_max; ++r) slope += std::log(ray.cusp_mass(r) / ray.cusp_mass(r + 1)) / std::log(Q);
  ray.lY = slope / (j_max - 1);
  return ray;
}

double delta_tail_rank2(const QuotientRay& ray, int n) {
  if (n <= 0) return 1.0;
  const double Q = ray.q;
  // even levels beyond j_max follow the closed form, ratio q^-2
  auto even_sum_from = [&](int k0) {
    double s = 0;
    int k = k0;
    for (; 2 * k <= ray.j_max; ++k) s += 1 / ray.orders[static_cast<std::size_t>(2 * k)];
    s += 1 / vertex_stabilizer_order(ray.q, 2 * k) / (1 - 1 / (Q * Q));
    return s;
  };
  return even_sum_from(n) / even_sum_from(0);
}

int TreeWalker::step(std::mt19937_64& rng) {
  int up = ray->up(level), down = ray->down(level);
  if (from > 0) --down;
  if (from < 0) --up;
  const auto k = static_cast<int>(uniform_below(rng, static_cast<std::uint64_t>(up + down)));
  if (k < up) {
    ++level;
    from = 1;
  } else {
    --level;
    from = -1;
  }
  return level;
}

GeodesicTrace simulate_geodesic(const QuotientRay& ray, long T, std::uint64_t seed) {
  GeodesicTrace tr;
  tr.seed = seed;
  std::mt19937_64 rng = stream_rng(seed, "geodesic", 0);
  TreeWalker w{&ray};
  tr.d.reserve(static_cast<std::size_t>(T));
  for (long t = 0; t < T; ++t) tr.d.push_back(w.step(rng));
  return tr;
}

std::string trace_csv(const GeodesicTrace& trace) {
  std::ostringstream os;
  os << "t,level\n";
  for (std::size_t i = 0; i < trace.d.size(); ++i) os << i + 1 << ',' << trace.d[i] << '\n';
  return os.str();
}

std::vector<double> occupation_measure(const QuotientRay& ray, long T, std::uint64_t seed) {
  std::mt19937_64 rng = stream_rng(seed, "occupation", 0);
  TreeWalker w{&ray};
  std::vector<long> counts;
  for (long t = 0; t < T; ++t) {
    const int l = w.step(rng);
    if (static_cast<std::size_t>(l) >= counts.size()) counts.resize(static_cast<std::size_t>(l) + 1, 0);
    ++counts[static_cast<std::size_t>(l)];
  }
  std::vector<double> out;
  for (long c : counts) out.push_back(static_cast<double>(c) / static_cast<double>(T));
  return out;
}

int RateLadder::at(long t, double lY, unsigned q) const {
  if (t <= 1) return shift;
  return static_cast<int>(std::ceil(c * std::log(static_cast<double>(t)) / std::log(static_cast<double>(q)) / lY - 1e-9)) +
         shift;
}

LoglawStats loglaw_experiment(const QuotientRay& ray, int trials, long T, std::uint64_t seed, int threads,
                              const RateLadder* ladder) {
  LoglawStats st;
  st.q = ray.q;
  st.T = T;
  st.trials = trials;
  st.lY = ray.lY;
  st.target = 1 / ray.lY;
  st.has_ladder = ladder != nullptr;
  if (ladder) st.ladder = *ladder;
  const double logT = std::log(static_cast<double>(T)) / std::log(static_cast<double>(ray.q));
  std::vector<double> ratios(static_cast<std::size_t>(trials));
  std::vector<std::vector<long>> heights(static_cast<std::size_t>(trials));
  std::vector<char> late(static_cast<std::size_t>(trials), 0);
  parallel_for(static_cast<std::size_t>(trials), threads, [&](std::size_t i) {
    std::mt19937_64 rng = stream_rng(seed, "loglaw", i);
    TreeWalker w{&ray};
    int best = 0, exc = 0;
    auto& h = heights[i];
    for (long t = 1; t <= T; ++t) {
      const int d = w.step(rng);
      best = std::max(best, d);
      exc = std::max(exc, d);
      if (d == 0) {
        if (static_cast<std::size_t>(exc) >= h.size()) h.resize(static_cast<std::size_t>(exc) + 1, 0);
        ++h[static_cast<std::size_t>(exc)];
        exc = 0;
      }
      if (ladder && 10 * t > T && d >= ladder->at(t, ray.lY, ray.q)) late[i] = 1;
    }
    ratios[i] = best / logT;
  });
  st.ratios = ratios;
  st.median_ratio = quantile(ratios, 0.5);
  st.q25 = quantile(ratios, 0.25);
  st.q75 = quantile(ratios, 0.75);
  std::vector<long> hist;
  for (const auto& h : heights) {
    if (h.size() > hist.size()) hist.resize(h.size(), 0);
    for (std::size_t r = 0; r < h.size(); ++r) hist[r] += h[r];
  }
  // N(r) = excursions reaching r; least squares of log_q N(r) on r where N(r) >= 100
  std::vector<double> xs, ys;
  long above = 0;
  for (long c : hist) above += c;
  st.excursions = above;
  for (std::size_t r = 0; r < hist.size(); ++r) {
    if (r >= 1 && above >= 100) {
      xs.push_back(static_cast<double>(r));
      ys.push_back(std::log(static_cast<double>(above)) / std::log(static_cast<double>(ray.q)));
    }
    above -= hist[r];
  }
  if (xs.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) mx += xs[k], my += ys[k];
    mx /= static_cast<double>(xs.size());
    my /= static_cast<double>(xs.size());
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < xs.size(); ++k) sxy += (xs[k] - mx) * (ys[k] - my), sxx += (xs[k] - mx) * (xs[k] - mx);
    st.excursion_tail_rate = std::pow(static_cast<double>(ray.q), sxy / sxx);
  }
  if (ladder) {
    long hits = 0;
    for (char c : late) hits += c;
    st.last_decade_fraction = static_cast<double>(hits) / trials;
  }
  return st;
}

}  // namespace ultralog
