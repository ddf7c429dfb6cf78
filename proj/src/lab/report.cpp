#include "spg/lab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>

#include "spg/codec/codec.hpp"
#include "spg/eval/evaluate.hpp"
#include "spg/lab/recipe.hpp"
#include "spg/util/errors.hpp"
#include "spg/util/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace spg::lab {
namespace {

// ---------------------------------------------------------------- cell store

struct Cells {
  std::string root;
  json prov;
  std::vector<std::string> arms;   // trained arms in recipe order
  std::vector<std::string> tiers;  // ascending kbps
  std::vector<double> snrs;        // descending
  int resamples = 1000;
  uint64_t seed = 1;
  mutable std::map<std::string, std::optional<eval::TierReport>> cache;

  const eval::TierReport* cell(const std::string& arm, const std::string& split,
                               const std::string& tier, const std::string& cond) const {
    std::string key = arm + "/" + split + "/" + tier + "/" + cond;
    auto it = cache.find(key);
    if (it == cache.end()) {
      std::string path = eval_report_path(root, arm, split, tier, cond);
      std::optional<eval::TierReport> r;
      if (fs::exists(path)) r = eval::read_tier_report(path);
      it = cache.emplace(key, std::move(r)).first;
    }
    return it->second ? &*it->second : nullptr;
  }
};

Cells load_cells(const std::string& root) {
  Cells c;
  c.root = root;
  std::ifstream in(root + "/provenance.json");
  if (!in) throw DataError("no provenance.json under " + root + "; run the recipe first");
  in >> c.prov;
  const json& recipe = c.prov.at("recipe");
  for (const auto& a : c.prov.value("trained_arms", json::array()))
    c.arms.push_back(a.get<std::string>());
  c.tiers = recipe.value("eval_tiers", std::vector<std::string>{});
  std::sort(c.tiers.begin(), c.tiers.end(), [](const std::string& a, const std::string& b) {
    return codec::tier_by_name(a).kbps < codec::tier_by_name(b).kbps;
  });
  c.snrs = recipe.value("noise_snrs", std::vector<double>{});
  std::sort(c.snrs.begin(), c.snrs.end(), std::greater<>());
  c.resamples = recipe.value("bootstrap_resamples", 1000);
  c.seed = recipe.value("bootstrap_seed", uint64_t(1));
  return c;
}

bool has_arm(const Cells& c, const std::string& name) {
  return std::find(c.arms.begin(), c.arms.end(), name) != c.arms.end();
}

std::string snr_name(double snr) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "snr%g", snr);
  return buf;
}

// -------------------------------------------------------------- extraction

std::vector<double> col(const eval::TierReport& r, const std::string& metric) {
  std::vector<double> v;
  v.reserve(r.per_utt.size());
  for (const auto& u : r.per_utt) {
    if (metric == "per") v.push_back(u.per);
    else if (metric == "l1") v.push_back(u.l1);
    else if (metric == "mr_stft") v.push_back(u.mr_stft);
    else if (metric == "si_sdr") v.push_back(u.si_sdr);
    else if (metric == "speaker_cos") v.push_back(u.speaker_cos);
    else if (metric == "feat_cos") v.push_back(u.feat_cos);
    else throw ConfigError("unknown metric column " + metric);
  }
  return v;
}

void check_aligned(const eval::TierReport& a, const eval::TierReport& b) {
  if (a.per_utt.size() != b.per_utt.size())
    throw DataError("evaluation cells disagree on utterance count (" + a.arm + "/" + a.condition +
                    " vs " + b.arm + "/" + b.condition + ")");
  for (size_t i = 0; i < a.per_utt.size(); ++i)
    if (a.per_utt[i].id != b.per_utt[i].id)
      throw DataError("evaluation cells are not utterance-aligned at index " +
                      std::to_string(i));
}

double mean_at(const std::vector<double>& v, const std::vector<int>& idx) {
  double s = 0.0;
  for (int i : idx) s += v[size_t(i)];
  return idx.empty() ? 0.0 : s / double(idx.size());
}

// ---------------------------------------------------------------- bootstrap

// Percentile CI of an arbitrary statistic over utterance resamples. The
// statistic sees a list of row indices; the point estimate uses the identity.
eval::Ci boot_stat(int n, int resamples, Rng rng,
                   const std::function<double(const std::vector<int>&)>& stat) {
  std::vector<int> idx(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) idx[size_t(i)] = i;
  eval::Ci ci;
  ci.n = n;
  ci.mean = stat(idx);
  if (n < 2 || resamples < 2) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  std::vector<double> vals(static_cast<size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    Rng rr = rng.derive("resample", uint64_t(r));
    for (int i = 0; i < n; ++i) idx[size_t(i)] = int(rr.below(uint64_t(n)));
    vals[size_t(r)] = stat(idx);
  }
  std::sort(vals.begin(), vals.end());
  auto pct = [&](double q) {
    double pos = q * double(vals.size() - 1);
    size_t k = size_t(pos);
    double f = pos - double(k);
    return k + 1 < vals.size() ? vals[k] * (1.0 - f) + vals[k + 1] * f : vals[k];
  };
  ci.lo = pct(0.025);
  ci.hi = pct(0.975);
  return ci;
}

// Same, over two independent index pools (e.g. seen and unseen splits).
eval::Ci boot_stat2(int n1, int n2, int resamples, Rng rng,
                    const std::function<double(const std::vector<int>&,
                                               const std::vector<int>&)>& stat) {
  std::vector<int> a(static_cast<size_t>(n1)), b(static_cast<size_t>(n2));
  for (int i = 0; i < n1; ++i) a[size_t(i)] = i;
  for (int i = 0; i < n2; ++i) b[size_t(i)] = i;
  eval::Ci ci;
  ci.n = n1 + n2;
  ci.mean = stat(a, b);
  if (n1 < 2 || n2 < 2 || resamples < 2) {
    ci.lo = ci.hi = ci.mean;
    return ci;
  }
  std::vector<double> vals(static_cast<size_t>(resamples));
  for (int r = 0; r < resamples; ++r) {
    Rng rr = rng.derive("resample", uint64_t(r));
    for (int i = 0; i < n1; ++i) a[size_t(i)] = int(rr.below(uint64_t(n1)));
    for (int i = 0; i < n2; ++i) b[size_t(i)] = int(rr.below(uint64_t(n2)));
    vals[size_t(r)] = stat(a, b);
  }
  std::sort(vals.begin(), vals.end());
  auto pct = [&](double q) {
    double pos = q * double(vals.size() - 1);
    size_t k = size_t(pos);
    double f = pos - double(k);
    return k + 1 < vals.size() ? vals[k] * (1.0 - f) + vals[k + 1] * f : vals[k];
  };
  ci.lo = pct(0.025);
  ci.hi = pct(0.975);
  return ci;
}

// Paired difference mean(a) - mean(b) with CI.
eval::Ci diff_ci(const Cells& c, const std::vector<double>& a, const std::vector<double>& b,
                 const std::string& tag) {
  if (a.size() != b.size()) throw DataError("paired columns differ in length");
  return boot_stat(int(a.size()), c.resamples, Rng(c.seed).derive(tag),
                   [&](const std::vector<int>& idx) { return mean_at(a, idx) - mean_at(b, idx); });
}

// Relative improvement 1 - mean(arm)/mean(base) with CI.
eval::Ci rel_ci(const Cells& c, const std::vector<double>& base, const std::vector<double>& arm,
                const std::string& tag) {
  if (base.size() != arm.size()) throw DataError("paired columns differ in length");
  return boot_stat(int(base.size()), c.resamples, Rng(c.seed).derive(tag),
                   [&](const std::vector<int>& idx) {
                     double mb = mean_at(base, idx);
                     return mb != 0.0 ? 1.0 - mean_at(arm, idx) / mb : 0.0;
                   });
}

json ci_json(const eval::Ci& ci) {
  return {{"mean", ci.mean}, {"lo", ci.lo}, {"hi", ci.hi}, {"n", ci.n}};
}

// ------------------------------------------------------------------- tables

// Retirement table: every trained arm at every tier, seen split, clean input,
// with paired relative improvements against the baseline arm.
json retirement_rows(const Cells& c) {
  json rows = json::array();
  for (const auto& arm : c.arms) {
    for (const auto& tier : c.tiers) {
      const auto* r = c.cell(arm, "test_seen", tier, "clean");
      if (!r) continue;
      json row = {{"arm", arm},
                  {"tier", tier},
                  {"kbps", r->kbps_nominal},
                  {"per", ci_json(r->per)},
                  {"l1", ci_json(r->l1)},
                  {"mr_stft", ci_json(r->mr_stft)},
                  {"si_sdr", ci_json(r->si_sdr)},
                  {"speaker_cos", ci_json(r->speaker_cos)},
                  {"mean_realized_kbps", r->mean_realized_kbps}};
      const auto* base = c.cell("baseline", "test_seen", tier, "clean");
      if (base && arm != "baseline") {
        check_aligned(*base, *r);
        row["rel_per"] = ci_json(
            rel_ci(c, col(*base, "per"), col(*r, "per"), "rel_per_" + tier + "_" + arm));
        row["rel_l1"] =
            ci_json(rel_ci(c, col(*base, "l1"), col(*r, "l1"), "rel_l1_" + tier + "_" + arm));
        row["per_diff"] = ci_json(
            diff_ci(c, col(*base, "per"), col(*r, "per"), "dper_" + tier + "_" + arm));
        row["l1_diff"] =
            ci_json(diff_ci(c, col(*base, "l1"), col(*r, "l1"), "dl1_" + tier + "_" + arm));
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

json noise_rows(const Cells& c) {
  json rows = json::array();
  std::vector<std::string> noise_arms =
      c.prov.at("recipe").value("noise_arms", std::vector<std::string>{});
  std::string tier = c.prov.at("recipe").value("noise_tier", std::string("1.5kbps"));
  for (const auto& arm : noise_arms) {
    if (!has_arm(c, arm)) continue;
    const auto* clean = c.cell(arm, "test_seen", tier, "clean");
    if (!clean) continue;
    json row0 = {{"arm", arm},        {"tier", tier},
                 {"condition", "clean"}, {"snr_db", nullptr},
                 {"per", ci_json(clean->per)}, {"si_sdr", ci_json(clean->si_sdr)}};
    rows.push_back(row0);
    for (double snr : c.snrs) {
      const auto* r = c.cell(arm, "test_seen", tier, snr_name(snr));
      if (!r) continue;
      check_aligned(*clean, *r);
      double growth =
          clean->per.mean != 0.0 ? (r->per.mean - clean->per.mean) / clean->per.mean : 0.0;
      rows.push_back({{"arm", arm},
                      {"tier", tier},
                      {"condition", snr_name(snr)},
                      {"snr_db", snr},
                      {"per", ci_json(r->per)},
                      {"si_sdr", ci_json(r->si_sdr)},
                      {"per_growth_from_clean", growth}});
    }
  }
  return rows;
}

// Generalization table in the three-variant x seen/unseen/gap shape.
json gap_rows(const Cells& c, const std::string& tier) {
  json rows = json::array();
  for (const auto& arm : {"baseline", "acoustic", "linguistic"}) {
    const auto* seen = c.cell(arm, "test_seen", tier, "clean");
    const auto* unseen = c.cell(arm, "test_unseen", tier, "clean");
    if (!seen || !unseen) continue;
    auto ps = col(*seen, "per");
    auto pu = col(*unseen, "per");
    eval::Ci gap = boot_stat2(int(ps.size()), int(pu.size()), c.resamples,
                              Rng(c.seed).derive(std::string("gap_") + arm),
                              [&](const std::vector<int>& a, const std::vector<int>& b) {
                                return mean_at(pu, b) - mean_at(ps, a);
                              });
    rows.push_back({{"arm", arm},
                    {"tier", tier},
                    {"seen_per", ci_json(seen->per)},
                    {"unseen_per", ci_json(unseen->per)},
                    {"gap", ci_json(gap)}});
  }
  return rows;
}

struct AlphaPoint {
  double alpha;
  std::string arm;
};

std::vector<AlphaPoint> alpha_points() {
  // The zero point is the baseline arm: a zero semantic weight contributes
  // nothing to training, which is exactly what the baseline trains.
  return {{0.0, "baseline"},
          {0.01, "alpha_0.01"},
          {0.05, "alpha_0.05"},
          {0.1, "alpha_0.1"},
          {0.2, "alpha_0.2"}};
}

json alpha_rows(const Cells& c, const std::string& tier) {
  json rows = json::array();
  for (const auto& p : alpha_points()) {
    const auto* r = c.cell(p.arm, "test_seen", tier, "clean");
    if (!r) continue;
    rows.push_back({{"alpha", p.alpha},
                    {"arm", p.arm},
                    {"tier", tier},
                    {"per", ci_json(r->per)},
                    {"mr_stft", ci_json(r->mr_stft)},
                    {"si_sdr", ci_json(r->si_sdr)}});
  }
  return rows;
}

json shuffle_rows(const Cells& c, const std::string& tier) {
  json rows = json::array();
  for (const auto& arm : {"linguistic", "shuffled", "baseline"}) {
    const auto* r = c.cell(arm, "test_seen", tier, "clean");
    if (!r) continue;
    rows.push_back({{"arm", arm},
                    {"tier", tier},
                    {"per", ci_json(r->per)},
                    {"feat_cos", ci_json(r->feat_cos)}});
  }
  return rows;
}

// ----------------------------------------------------------------- criteria

json criterion(int id, const std::string& name) {
  return {{"id", id},     {"name", name},   {"evaluated", false},
          {"passed", false}, {"detail", ""}, {"values", json::object()}};
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Tier ordering half of the RVQ criterion: mean L1 strictly falls as stages
// are added, for every trained arm.
json crit_tier_ordering(const Cells& c) {
  json out = criterion(1, "distortion strictly decreases across tiers");
  if (c.tiers.size() < 2) {
    out["detail"] = "fewer than two tiers evaluated";
    return out;
  }
  bool all_ok = true;
  std::string detail;
  json values;
  for (const auto& arm : c.arms) {
    std::vector<double> l1s;
    for (const auto& tier : c.tiers) {
      const auto* r = c.cell(arm, "test_seen", tier, "clean");
      if (r) l1s.push_back(r->l1.mean);
    }
    if (l1s.size() != c.tiers.size()) {
      all_ok = false;
      detail += arm + ": missing cells; ";
      continue;
    }
    bool ok = true;
    for (size_t i = 0; i + 1 < l1s.size(); ++i) ok &= l1s[i + 1] < l1s[i];
    values[arm] = l1s;
    if (!ok) {
      all_ok = false;
      detail += arm + ": not strictly decreasing; ";
    }
  }
  out["evaluated"] = true;
  out["passed"] = all_ok && !c.arms.empty();
  out["detail"] = all_ok ? "mean L1 strictly decreasing for every arm" : detail;
  out["values"] = values;
  return out;
}

json crit_retirement(const Cells& c) {
  json out = criterion(3, "semantic gains large at low rate, retired at high rate");
  std::string lo_tier = c.tiers.empty() ? "" : c.tiers.front();
  std::string hi_tier = c.tiers.empty() ? "" : c.tiers.back();
  if (lo_tier.empty() || hi_tier == lo_tier) {
    out["detail"] = "needs at least two tiers";
    return out;
  }
  const auto* base_lo = c.cell("baseline", "test_seen", lo_tier, "clean");
  if (!base_lo) {
    out["detail"] = "baseline cells missing";
    return out;
  }
  bool all_ok = true;
  std::string detail;
  json values;
  for (const auto& arm : {"acoustic", "linguistic"}) {
    if (!has_arm(c, arm)) {
      all_ok = false;
      detail += std::string(arm) + ": arm missing; ";
      continue;
    }
    json v;
    // Low-rate gains on PER and L1, both >= 5% relative with CI excluding 0.
    bool ok = true;
    for (const auto* metric : {"per", "l1"}) {
      const auto* a = c.cell(arm, "test_seen", lo_tier, "clean");
      if (!a) {
        ok = false;
        detail += std::string(arm) + ": low-tier cell missing; ";
        break;
      }
      check_aligned(*base_lo, *a);
      eval::Ci rel = rel_ci(c, col(*base_lo, metric), col(*a, metric),
                            std::string("c3_rel_") + metric + "_" + lo_tier + "_" + arm);
      eval::Ci d = diff_ci(c, col(*base_lo, metric), col(*a, metric),
                           std::string("c3_diff_") + metric + "_" + lo_tier + "_" + arm);
      v[std::string("rel_") + metric + "_low"] = ci_json(rel);
      bool this_ok = rel.mean >= 0.05 && d.lo > 0.0;
      if (!this_ok)
        detail += std::string(arm) + " " + metric + "@" + lo_tier + " improvement " +
                  fmt(rel.mean * 100) + "% (diff CI lo " + fmt(d.lo) + "); ";
      ok &= this_ok;
    }
    // Relative PER improvement per tier; retirement and monotonicity checks.
    std::vector<double> rel_curve;
    bool have_curve = true;
    for (const auto& tier : c.tiers) {
      const auto* b = c.cell("baseline", "test_seen", tier, "clean");
      const auto* a = c.cell(arm, "test_seen", tier, "clean");
      if (!b || !a) {
        have_curve = false;
        break;
      }
      check_aligned(*b, *a);
      rel_curve.push_back(rel_ci(c, col(*b, "per"), col(*a, "per"),
                                 "c3_curve_" + tier + "_" + arm)
                              .mean);
    }
    if (!have_curve) {
      ok = false;
      detail += std::string(arm) + ": incomplete tier curve; ";
    } else {
      v["rel_per_curve"] = rel_curve;
      double low = rel_curve.front(), high = rel_curve.back();
      if (!(high <= 0.5 * low)) {
        ok = false;
        detail += std::string(arm) + ": high-rate improvement " + fmt(high * 100) +
                  "% not <= half of low-rate " + fmt(low * 100) + "%; ";
      }
      // Consecutive increases must not be CI-separated.
      for (size_t i = 0; i + 1 < c.tiers.size(); ++i) {
        const auto* b0 = c.cell("baseline", "test_seen", c.tiers[i], "clean");
        const auto* a0 = c.cell(arm, "test_seen", c.tiers[i], "clean");
        const auto* b1 = c.cell("baseline", "test_seen", c.tiers[i + 1], "clean");
        const auto* a1 = c.cell(arm, "test_seen", c.tiers[i + 1], "clean");
        auto vb0 = col(*b0, "per"), va0 = col(*a0, "per");
        auto vb1 = col(*b1, "per"), va1 = col(*a1, "per");
        eval::Ci dstep = boot_stat(
            int(vb0.size()), c.resamples,
            Rng(c.seed).derive("c3_step_" + c.tiers[i] + "_" + arm),
            [&](const std::vector<int>& idx) {
              double r0 = mean_at(vb0, idx) != 0.0
                              ? 1.0 - mean_at(va0, idx) / mean_at(vb0, idx)
                              : 0.0;
              double r1 = mean_at(vb1, idx) != 0.0
                              ? 1.0 - mean_at(va1, idx) / mean_at(vb1, idx)
                              : 0.0;
              return r1 - r0;
            });
        if (dstep.lo > 0.0) {
          ok = false;
          detail += std::string(arm) + ": improvement rises " + c.tiers[i] + "->" +
                    c.tiers[i + 1] + " beyond CI noise; ";
        }
      }
    }
    values[arm] = v;
    all_ok &= ok;
  }
  out["evaluated"] = true;
  out["passed"] = all_ok;
  if (all_ok) out["detail"] = "both prior variants: >=5% low-rate gains, retired at high rate";
  else out["detail"] = detail;
  out["values"] = values;
  return out;
}

json crit_tradeoff(const Cells& c, const std::string& tier) {
  json out = criterion(4, "acoustic keeps prosody and voice, linguistic keeps phones");
  const auto* ac = c.cell("acoustic", "test_seen", tier, "clean");
  const auto* li = c.cell("linguistic", "test_seen", tier, "clean");
  if (!ac || !li) {
    out["detail"] = "acoustic or linguistic cell missing at " + tier;
    return out;
  }
  check_aligned(*ac, *li);
  json values;
  std::string detail;
  bool ok = true;

  // Pitch correlation pairs only where both arms could track a contour.
  std::vector<double> pa, pl;
  for (size_t i = 0; i < ac->per_utt.size(); ++i)
    if (ac->per_utt[i].pitch_computable && li->per_utt[i].pitch_computable) {
      pa.push_back(ac->per_utt[i].pitch_r);
      pl.push_back(li->per_utt[i].pitch_r);
    }
  auto judge = [&](const std::string& name, eval::Ci d, bool want_positive) {
    values[name] = ci_json(d);
    bool wrong_dir = want_positive ? d.mean < 0.0 : d.mean > 0.0;
    bool separated = d.lo > 0.0 || d.hi < 0.0;
    bool tie = !separated;
    values[name + "_tie"] = tie;
    if (wrong_dir && separated) {
      ok = false;
      detail += name + " CI-separated in the wrong direction; ";
    } else {
      detail += name + (tie ? " tie; " : " ok; ");
    }
  };
  judge("pitch_acoustic_minus_linguistic",
        pa.size() >= 2 ? diff_ci(c, pa, pl, "c4_pitch") : eval::Ci{}, true);
  judge("speaker_acoustic_minus_linguistic",
        diff_ci(c, col(*ac, "speaker_cos"), col(*li, "speaker_cos"), "c4_spk"), true);
  judge("per_acoustic_minus_linguistic", diff_ci(c, col(*ac, "per"), col(*li, "per"), "c4_per"),
        true);
  out["evaluated"] = true;
  out["passed"] = ok;
  out["detail"] = detail;
  out["values"] = values;
  return out;
}

json crit_noise(const Cells& c) {
  json out = criterion(5, "linguistic prior degrades less in noise");
  std::string tier = c.prov.at("recipe").value("noise_tier", std::string("1.5kbps"));
  if (c.snrs.empty()) {
    out["detail"] = "no noise conditions evaluated";
    return out;
  }
  double worst = c.snrs.back();
  const auto* bc = c.cell("baseline", "test_seen", tier, "clean");
  const auto* bw = c.cell("baseline", "test_seen", tier, snr_name(worst));
  const auto* lc = c.cell("linguistic", "test_seen", tier, "clean");
  const auto* lw = c.cell("linguistic", "test_seen", tier, snr_name(worst));
  if (!bc || !bw || !lc || !lw) {
    out["detail"] = "noise cells missing";
    return out;
  }
  check_aligned(*bc, *bw);
  check_aligned(*bc, *lc);
  check_aligned(*lc, *lw);
  auto vbc = col(*bc, "per"), vbw = col(*bw, "per");
  auto vlc = col(*lc, "per"), vlw = col(*lw, "per");
  auto growth = [](double clean, double noisy) {
    return clean != 0.0 ? (noisy - clean) / clean : 0.0;
  };
  eval::Ci d = boot_stat(int(vbc.size()), c.resamples, Rng(c.seed).derive("c5_growth"),
                         [&](const std::vector<int>& idx) {
                           return growth(mean_at(vbc, idx), mean_at(vbw, idx)) -
                                  growth(mean_at(vlc, idx), mean_at(vlw, idx));
                         });
  double gb = growth(bc->per.mean, bw->per.mean);
  double gl = growth(lc->per.mean, lw->per.mean);
  json values;
  values["growth_baseline"] = gb;
  values["growth_linguistic"] = gl;
  values["growth_gap"] = ci_json(d);
  bool gap_ok = d.mean > 0.0 && d.lo > 0.0;

  // PER must not improve as SNR drops, for every arm in the noise sweep.
  bool mono_ok = true;
  std::string mono_detail;
  std::vector<std::string> noise_arms =
      c.prov.at("recipe").value("noise_arms", std::vector<std::string>{});
  for (const auto& arm : noise_arms) {
    const auto* prev = c.cell(arm, "test_seen", tier, "clean");
    if (!prev) continue;
    double last = prev->per.mean;
    for (double snr : c.snrs) {
      const auto* r = c.cell(arm, "test_seen", tier, snr_name(snr));
      if (!r) continue;
      if (r->per.mean < last) {
        mono_ok = false;
        mono_detail += arm + " PER improves at " + snr_name(snr) + "; ";
      }
      last = r->per.mean;
    }
  }
  values["monotone"] = mono_ok;
  out["evaluated"] = true;
  out["passed"] = gap_ok && mono_ok;
  out["detail"] = (gap_ok ? std::string("baseline grows ") + fmt(gb) + " vs linguistic " +
                                fmt(gl) + ", gap CI excludes 0; "
                          : std::string("growth gap not CI-separated (lo ") + fmt(d.lo) + "); ") +
                  (mono_ok ? "PER monotone in SNR" : mono_detail);
  out["values"] = values;
  return out;
}

json crit_hallucination(const Cells& c, const std::string& tier) {
  json out = criterion(6, "linguistic prior suppresses confident wrong phones");
  const auto* b = c.cell("baseline", "test_seen", tier, "clean");
  const auto* l = c.cell("linguistic", "test_seen", tier, "clean");
  if (!b || !l) {
    out["detail"] = "cells missing at " + tier;
    return out;
  }
  double hb = b->hallucination_pooled, hl = l->hallucination_pooled;
  json values = {{"baseline", hb}, {"linguistic", hl}};
  out["evaluated"] = true;
  if (hb <= 0.0) {
    out["detail"] = "baseline hallucination rate is zero; reduction undefined";
    out["values"] = values;
    return out;
  }
  double red = (hb - hl) / hb;
  values["relative_reduction"] = red;
  out["passed"] = hl <= hb && red >= 0.10;
  out["detail"] = "pooled rate " + fmt(hb) + " -> " + fmt(hl) + " (" + fmt(red * 100) +
                  "% reduction, need >=10%)";
  out["values"] = values;
  return out;
}

json crit_gap(const Cells& c, const std::string& tier) {
  json out = criterion(7, "linguistic prior shrinks the unseen-speaker gap");
  const auto* bs = c.cell("baseline", "test_seen", tier, "clean");
  const auto* bu = c.cell("baseline", "test_unseen", tier, "clean");
  const auto* ls = c.cell("linguistic", "test_seen", tier, "clean");
  const auto* lu = c.cell("linguistic", "test_unseen", tier, "clean");
  if (!bs || !bu || !ls || !lu) {
    out["detail"] = "cells missing at " + tier;
    return out;
  }
  check_aligned(*bs, *ls);
  check_aligned(*bu, *lu);
  auto vbs = col(*bs, "per"), vbu = col(*bu, "per");
  auto vls = col(*ls, "per"), vlu = col(*lu, "per");
  eval::Ci d = boot_stat2(int(vbs.size()), int(vbu.size()), c.resamples,
                          Rng(c.seed).derive("c7_gapdiff"),
                          [&](const std::vector<int>& a, const std::vector<int>& b2) {
                            double gb = mean_at(vbu, b2) - mean_at(vbs, a);
                            double gl = mean_at(vlu, b2) - mean_at(vls, a);
                            return gb - gl;
                          });
  double gap_b = bu->per.mean - bs->per.mean;
  double gap_l = lu->per.mean - ls->per.mean;
  json values = {{"gap_baseline", gap_b},
                 {"gap_linguistic", gap_l},
                 {"gap_difference", ci_json(d)}};
  bool ok = d.mean > 0.0 && d.lo > 0.0;
  out["evaluated"] = true;
  out["passed"] = ok;
  out["detail"] = "baseline gap " + fmt(gap_b) + " vs linguistic " + fmt(gap_l) +
                  (ok ? std::string(", difference CI excludes 0")
                      : ", difference not CI-separated (lo " + fmt(d.lo) + ")");
  out["values"] = values;
  return out;
}

json crit_shuffle(const Cells& c, const std::string& tier) {
  json out = criterion(8, "shuffled prior loses feature alignment and gains nothing");
  const auto* norm = c.cell("linguistic", "test_seen", tier, "clean");
  const auto* shuf = c.cell("shuffled", "test_seen", tier, "clean");
  const auto* base = c.cell("baseline", "test_seen", tier, "clean");
  if (!norm || !shuf || !base) {
    out["detail"] = "cells missing at " + tier;
    return out;
  }
  check_aligned(*norm, *shuf);
  check_aligned(*base, *shuf);
  json values;
  double fgap = norm->feat_cos.mean - shuf->feat_cos.mean;
  values["feat_cos_normal"] = norm->feat_cos.mean;
  values["feat_cos_shuffled"] = shuf->feat_cos.mean;
  values["feat_cos_gap"] = fgap;
  bool feat_ok = norm->feat_cos.n > 0 && shuf->feat_cos.n > 0 && fgap > 0.3;
  bool order_ok = shuf->per.mean >= norm->per.mean;
  values["per_normal"] = norm->per.mean;
  values["per_shuffled"] = shuf->per.mean;
  eval::Ci d = diff_ci(c, col(*base, "per"), col(*shuf, "per"), "c8_base_vs_shuf");
  values["per_baseline_minus_shuffled"] = ci_json(d);
  bool not_better = !(d.mean > 0.0 && d.lo > 0.0);
  out["evaluated"] = true;
  out["passed"] = feat_ok && order_ok && not_better;
  out["detail"] = std::string("feature-cosine gap ") + fmt(fgap) + (feat_ok ? " (>0.3); " : " (need >0.3); ") +
                  (order_ok ? "shuffled PER >= normal; " : "shuffled PER below normal; ") +
                  (not_better ? "shuffled does not beat baseline beyond CI noise"
                              : "shuffled beats baseline beyond CI noise");
  out["values"] = values;
  return out;
}

json crit_alpha(const Cells& c, const std::string& tier) {
  json out = criterion(9, "semantic weight has a sweet spot");
  std::map<double, const eval::TierReport*> pts;
  for (const auto& p : alpha_points()) {
    const auto* r = c.cell(p.arm, "test_seen", tier, "clean");
    if (r) pts[p.alpha] = r;
  }
  for (double need : {0.0, 0.05, 0.1, 0.2})
    if (!pts.count(need)) {
      out["detail"] = "sweep cell for alpha=" + fmt(need) + " missing";
      return out;
    }
  json values;
  for (const auto& [a, r] : pts) values["per_" + fmt(a)] = r->per.mean;

  auto pdiff = [&](double a1, double a2, const char* metric) {
    check_aligned(*pts[a1], *pts[a2]);
    return diff_ci(c, col(*pts[a1], metric), col(*pts[a2], metric),
                   std::string("c9_") + metric + "_" + fmt(a1) + "_" + fmt(a2));
  };

  // Signature A: the sweet spot is no worse than either end on PER, with at
  // least one end CI-separated.
  double p0 = pts[0.0]->per.mean, p05 = pts[0.05]->per.mean;
  double p1 = pts[0.1]->per.mean, p2 = pts[0.2]->per.mean;
  bool means_ok = p05 <= p0 && p1 <= p0 && p05 <= p2 && p1 <= p2;
  eval::Ci a1 = pdiff(0.0, 0.05, "per"), a2 = pdiff(0.0, 0.1, "per");
  eval::Ci a3 = pdiff(0.2, 0.05, "per"), a4 = pdiff(0.2, 0.1, "per");
  bool separated = a1.lo > 0.0 || a2.lo > 0.0 || a3.lo > 0.0 || a4.lo > 0.0;
  bool sig_a = means_ok && separated;
  values["signature_a"] = {{"means_ok", means_ok},
                           {"separated", separated},
                           {"d0_005", ci_json(a1)},
                           {"d0_01", ci_json(a2)},
                           {"d02_005", ci_json(a3)},
                           {"d02_01", ci_json(a4)}};

  // Signature B: over-weighting costs spectral fidelity.
  eval::Ci b = pdiff(0.2, 0.05, "mr_stft");
  bool sig_b = b.mean > 0.0 && b.lo > 0.0;
  values["signature_b"] = {{"mr_stft_02_minus_005", ci_json(b)}};

  out["evaluated"] = true;
  out["passed"] = sig_a || sig_b;
  out["detail"] = std::string("signature A ") + (sig_a ? "holds" : "fails") + ", signature B " +
                  (sig_b ? "holds" : "fails");
  out["values"] = values;
  return out;
}

json crit_gates(const Cells& c) {
  json out = criterion(10, "priors and judges clear their specialization gates");
  const json& gates = c.prov.value("prior_gates", json::object());
  json values;
  std::string detail;
  bool ok = true;
  if (!gates.contains("acoustic") || !gates.contains("linguistic")) {
    out["detail"] = "gate reports missing from provenance";
    return out;
  }
  const json& ac = gates.at("acoustic");
  const json& li = gates.at("linguistic");
  double ac_f0 = ac.value("f0_probe_acc", 0.0);
  double ac_ph = ac.value("phone_probe_acc", 0.0);
  double ac_chance = ac.value("phone_majority", 1.0);
  double li_ph = li.value("phone_probe_acc", 0.0);
  double li_f0 = li.value("f0_probe_acc", 1.0);
  values["acoustic"] = ac;
  values["linguistic"] = li;
  if (!(ac_f0 >= 0.5)) { ok = false; detail += "acoustic f0 probe " + fmt(ac_f0) + " < 0.5; "; }
  if (!(ac_ph > ac_chance)) { ok = false; detail += "acoustic phone probe not above chance; "; }
  if (!(li_ph >= 0.8)) { ok = false; detail += "linguistic phone probe " + fmt(li_ph) + " < 0.8; "; }
  if (!(li_f0 <= 0.35)) { ok = false; detail += "linguistic f0 probe " + fmt(li_f0) + " > 0.35; "; }

  double rec_acc = c.prov.value("recognizer", json::object()).value("accuracy", 0.0);
  values["recognizer_accuracy"] = rec_acc;
  if (!(rec_acc >= 0.85)) { ok = false; detail += "recognizer accuracy " + fmt(rec_acc) + " < 0.85; "; }

  const json& recipe = c.prov.at("recipe");
  uint64_t ls = recipe.value("linguistic_seed", uint64_t(0));
  uint64_t as = recipe.value("acoustic_seed", uint64_t(0));
  uint64_t es = recipe.value("eval_models", json::object()).value("seed", uint64_t(0));
  bool disjoint = ls != es && as != es && ls != as;
  values["lineage_disjoint"] = disjoint;
  if (!disjoint) { ok = false; detail += "prior and judge seeds overlap; "; }

  out["evaluated"] = true;
  out["passed"] = ok;
  out["detail"] = ok ? "all gates met, judge lineage disjoint from priors" : detail;
  out["values"] = values;
  return out;
}

json crit_bitrate(const Cells& c) {
  json out = criterion(11, "realized bitrate within 1% of nominal");
  double worst = 0.0;
  int cells = 0;
  std::string worst_cell;
  for (const auto& arm : c.arms) {
    for (const auto& split : {"test_seen", "test_unseen"}) {
      for (const auto& tier : c.tiers) {
        std::vector<std::string> conds = {"clean"};
        for (double s : c.snrs) conds.push_back(snr_name(s));
        for (const auto& cond : conds) {
          const auto* r = c.cell(arm, split, tier, cond);
          if (!r) continue;
          ++cells;
          for (const auto& u : r->per_utt) {
            double err = std::abs(u.realized_kbps - r->kbps_nominal) / r->kbps_nominal;
            if (err > worst) {
              worst = err;
              worst_cell = arm + "/" + split + "/" + tier + "/" + cond + "/" + u.id;
            }
          }
        }
      }
    }
  }
  out["evaluated"] = cells > 0;
  out["passed"] = cells > 0 && worst < 0.01;
  out["detail"] = cells == 0 ? "no cells found"
                             : "worst deviation " + fmt(worst * 100) + "% (" + worst_cell + ")";
  out["values"] = {{"worst_relative_error", worst}, {"cells", cells}};
  return out;
}

// ------------------------------------------------------------------ writers

std::string num_cell(const json& v) {
  if (v.is_null()) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v.get<double>());
  return buf;
}

std::string ci_cells(const json& row, const std::string& key) {
  if (!row.contains(key)) return ",,";
  const json& ci = row.at(key);
  return num_cell(ci.at("mean")) + "," + num_cell(ci.at("lo")) + "," + num_cell(ci.at("hi"));
}

void write_csv(const std::string& path, const std::string& header,
               const std::vector<std::string>& lines) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << header << "\n";
    for (const auto& l : lines) out << l << "\n";
  }
  fs::rename(tmp, path);
}

void write_retirement_csv(const json& rows, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& r : rows)
    lines.push_back(r.at("arm").get<std::string>() + "," + r.at("tier").get<std::string>() + "," +
                    num_cell(r.at("kbps")) + "," + num_cell(r.at("mean_realized_kbps")) + "," +
                    ci_cells(r, "per") + "," + ci_cells(r, "l1") + "," + ci_cells(r, "mr_stft") +
                    "," + ci_cells(r, "si_sdr") + "," + ci_cells(r, "speaker_cos") + "," +
                    ci_cells(r, "rel_per") + "," + ci_cells(r, "rel_l1"));
  write_csv(path,
            "arm,tier,kbps_nominal,kbps_realized,per,per_lo,per_hi,l1,l1_lo,l1_hi,"
            "mr_stft,mr_stft_lo,mr_stft_hi,si_sdr,si_sdr_lo,si_sdr_hi,"
            "speaker_cos,speaker_cos_lo,speaker_cos_hi,"
            "rel_per_gain,rel_per_gain_lo,rel_per_gain_hi,rel_l1_gain,rel_l1_gain_lo,rel_l1_gain_hi",
            lines);
}

void write_noise_csv(const json& rows, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& r : rows)
    lines.push_back(r.at("arm").get<std::string>() + "," + r.at("tier").get<std::string>() + "," +
                    r.at("condition").get<std::string>() + "," + num_cell(r.at("snr_db")) + "," +
                    ci_cells(r, "per") + "," + ci_cells(r, "si_sdr") + "," +
                    (r.contains("per_growth_from_clean")
                         ? num_cell(r.at("per_growth_from_clean"))
                         : ""));
  write_csv(path,
            "arm,tier,condition,snr_db,per,per_lo,per_hi,si_sdr,si_sdr_lo,si_sdr_hi,"
            "per_growth_from_clean",
            lines);
}

void write_gap_csv(const json& rows, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& r : rows)
    lines.push_back(r.at("arm").get<std::string>() + "," + r.at("tier").get<std::string>() + "," +
                    ci_cells(r, "seen_per") + "," + ci_cells(r, "unseen_per") + "," +
                    ci_cells(r, "gap"));
  write_csv(path,
            "arm,tier,seen_per,seen_per_lo,seen_per_hi,unseen_per,unseen_per_lo,unseen_per_hi,"
            "gap,gap_lo,gap_hi",
            lines);
}

void write_alpha_csv(const json& rows, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& r : rows)
    lines.push_back(num_cell(r.at("alpha")) + "," + r.at("arm").get<std::string>() + "," +
                    r.at("tier").get<std::string>() + "," + ci_cells(r, "per") + "," +
                    ci_cells(r, "mr_stft") + "," + ci_cells(r, "si_sdr"));
  write_csv(path,
            "alpha,arm,tier,per,per_lo,per_hi,mr_stft,mr_stft_lo,mr_stft_hi,"
            "si_sdr,si_sdr_lo,si_sdr_hi",
            lines);
}

void write_shuffle_csv(const json& rows, const std::string& path) {
  std::vector<std::string> lines;
  for (const auto& r : rows)
    lines.push_back(r.at("arm").get<std::string>() + "," + r.at("tier").get<std::string>() + "," +
                    ci_cells(r, "per") + "," + ci_cells(r, "feat_cos"));
  write_csv(path, "arm,tier,per,per_lo,per_hi,feat_cos,feat_cos_lo,feat_cos_hi", lines);
}

json protocol_rows(const Cells& c, const std::string& protocol) {
  if (protocol == "retirement") return retirement_rows(c);
  if (protocol == "noise") return noise_rows(c);
  if (protocol == "gap") return gap_rows(c, "1.5kbps");
  if (protocol == "alpha") return alpha_rows(c, "3kbps");
  if (protocol == "shuffle") return shuffle_rows(c, "1.5kbps");
  throw ConfigError("unknown protocol " + protocol +
                    " (expected retirement, noise, gap, alpha or shuffle)");
}

void write_protocol(const json& rows, const std::string& protocol, const std::string& path) {
  if (protocol == "retirement") write_retirement_csv(rows, path);
  else if (protocol == "noise") write_noise_csv(rows, path);
  else if (protocol == "gap") write_gap_csv(rows, path);
  else if (protocol == "alpha") write_alpha_csv(rows, path);
  else write_shuffle_csv(rows, path);
}

}  // namespace

void write_protocol_csv(const std::string& root, const std::string& protocol,
                        const std::string& out_path) {
  Cells c = load_cells(root);
  write_protocol(protocol_rows(c, protocol), protocol, out_path);
}

json compose_report(const std::string& root, const std::string& out_dir, std::ostream& log) {
  Cells c = load_cells(root);
  fs::create_directories(out_dir);

  json protocols;
  for (const auto& p : {"retirement", "noise", "gap", "alpha", "shuffle"}) {
    json rows = protocol_rows(c, p);
    protocols[p] = rows;
    write_protocol(rows, p, out_dir + "/" + std::string(p) + ".csv");
    log << "[report] " << p << ".csv: " << rows.size() << " rows\n";
  }

  json criteria = json::array();
  criteria.push_back(crit_tier_ordering(c));
  {
    json c2 = criterion(2, "loss gradients match finite differences");
    c2["detail"] = "established by the unit gradient suite, not by matrix artifacts";
    criteria.push_back(c2);
  }
  criteria.push_back(crit_retirement(c));
  criteria.push_back(crit_tradeoff(c, "3kbps"));
  criteria.push_back(crit_noise(c));
  criteria.push_back(crit_hallucination(c, "1.5kbps"));
  criteria.push_back(crit_gap(c, "1.5kbps"));
  criteria.push_back(crit_shuffle(c, "1.5kbps"));
  criteria.push_back(crit_alpha(c, "3kbps"));
  criteria.push_back(crit_gates(c));
  criteria.push_back(crit_bitrate(c));

  json summary;
  summary["schema"] = 1;
  summary["csv_schema"] = 1;
  summary["recipe_hash"] = c.prov.value("recipe_hash", "");
  summary["trained_arms"] = c.prov.value("trained_arms", json::array());
  summary["failed_arms"] = c.prov.value("failed_arms", json::array());
  summary["tiers"] = c.tiers;
  summary["protocols"] = protocols;
  summary["criteria"] = criteria;

  std::string path = out_dir + "/summary.json";
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << summary.dump(1) << "\n";
  }
  fs::rename(tmp, path);
  for (const auto& cr : criteria)
    log << "[report] criterion " << cr.at("id").get<int>() << " "
        << (cr.at("evaluated").get<bool>() ? (cr.at("passed").get<bool>() ? "PASS" : "FAIL")
                                           : "UNEVALUATED")
        << ": " << cr.at("detail").get<std::string>() << "\n";
  log << "[report] summary at " << path << "\n";
  return summary;
}

}  // namespace spg::lab
