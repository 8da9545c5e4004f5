#pragma once

#include <cmath>
#include <functional>
#include <thread>

#include "mimn/tape.hpp"

namespace mimn {

// One trainable tensor inside a parameter struct. param_list() on the struct
// hands these out so the optimizer, checkpointing and the finite-difference
// verifier can enumerate parameters uniformly.
struct ParamRef {
  std::string name;
  Tensor* tensor;
  bool trainable = true;
};

using ParamList = std::vector<ParamRef>;

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_param;
  int worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  long params_checked = 0;
};

inline double rel_err(double a, double b) {
  double denom = std::max({std::fabs(a), std::fabs(b), 1e-8});
  return std::fabs(a - b) / denom;
}

// Central-difference gradient verification.
//
// P must be copyable and expose `ParamList param_list()`. `analytic` computes
// the gradient set at the given parameters (normally via a tape backward).
// `numeric` evaluates the same scalar loss, independently of the tape; it is
// given extended precision so that near-zero gradients stay above the
// difference noise floor, plus the name of the perturbed parameter so an
// evaluator may reuse work that cannot depend on it. Each evaluation uses
// the exactly representable step actually applied, not the nominal one.
// Work is chunked over threads deterministically; the max-reduction is order
// independent.
template <class P>
GradCheckReport check_gradients(
    const P& params, const std::function<GradientSet(const P&)>& analytic,
    const std::function<long double(const P&, const std::string&)>& numeric,
    double step, int threads = 1) {
  MIMN_CHECK(step > 0.0 && step <= 1e-3, "check_gradients: step must be in (0, 1e-3]");
  GradientSet grads = analytic(params);

  struct Slot {
    std::string name;
    int flat_index;
  };
  std::vector<Slot> slots;
  {
    P probe = params;
    for (const ParamRef& p : probe.param_list()) {
      if (!p.trainable) continue;
      MIMN_CHECK(grads.count(p.name) == 1,
                 "check_gradients: no gradient entry for " + p.name);
      for (int i = 0; i < p.tensor->size(); ++i) slots.push_back({p.name, i});
    }
  }

  int nthreads = std::max(1, threads);
  std::vector<GradCheckReport> partial(static_cast<size_t>(nthreads));
  auto worker = [&](int tid) {
    P local = params;
    ParamList refs = local.param_list();
    GradCheckReport& rep = partial[static_cast<size_t>(tid)];
    for (size_t s = static_cast<size_t>(tid); s < slots.size(); s += static_cast<size_t>(nthreads)) {
      const Slot& slot = slots[s];
      Tensor* t = nullptr;
      for (const ParamRef& p : refs)
        if (p.name == slot.name) {
          t = p.tensor;
          break;
        }
      double orig = (*t)[slot.flat_index];
      double up = orig + step;
      double dn = orig - step;
      (*t)[slot.flat_index] = up;
      long double lp = numeric(local, slot.name);
      (*t)[slot.flat_index] = dn;
      long double lm = numeric(local, slot.name);
      (*t)[slot.flat_index] = orig;
      double width = up - dn;  // representable step actually taken
      double fd = static_cast<double>((lp - lm) / static_cast<long double>(width));
      double an = grads.at(slot.name)[slot.flat_index];
      double e = rel_err(an, fd);
      rep.params_checked++;
      if (e > rep.max_rel_err) {
        rep.max_rel_err = e;
        rep.worst_param = slot.name;
        rep.worst_index = slot.flat_index;
        rep.analytic = an;
        rep.numeric = fd;
      }
    }
  };

  if (nthreads == 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(nthreads));
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker, t);
    for (auto& th : pool) th.join();
  }

  GradCheckReport out;
  for (const auto& rep : partial) {
    out.params_checked += rep.params_checked;
    if (rep.max_rel_err >= out.max_rel_err && rep.worst_index >= 0) {
      out.max_rel_err = rep.max_rel_err;
      out.worst_param = rep.worst_param;
      out.worst_index = rep.worst_index;
      out.analytic = rep.analytic;
      out.numeric = rep.numeric;
    }
  }
  return out;
}

}  // namespace mimn
