#pragma once

#include "calibration.hpp"
#include "io.hpp"
#include "metrics.hpp"
#include "recon.hpp"

#include <cstdlib>
#include <map>
#include <set>

namespace ksplab {

/// Environment variable naming the default output directory.
inline constexpr char const* kOutputDirEnv = "KSPLAB_OUTPUT_DIR";

inline std::filesystem::path default_output_dir()
{
  char const* v = std::getenv(kOutputDirEnv);
  return (v != nullptr && *v != '\0') ? std::filesystem::path(v) : std::filesystem::path("ksplab_out");
}

class ManifestError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct GroupSpec
{
  std::string name;
  PhantomSpec phantom{};
  /// Phantom seed offset added to the manifest seed.
  std::optional<std::uint64_t> phantom_seed;
  std::vector<int> accelerations{8};
  MaskKind mask_kind = MaskKind::uniform;
  std::size_t acs_lines = 16;
  /// Provenance only; evaluation ignores it.
  std::optional<int> batch_size;
};

struct ReconSettings
{
  ReconMethod method = ReconMethod::gd;
  std::size_t iterations = 30;
  /// Step as a multiple of default_step_base.
  double step_scale = 0.5;
  /// Tune step_scale once, on the first group's first acceleration.
  bool tune_step = false;
  bool use_ground_truth_losses = false;
  std::size_t dc_every = 0;
};

struct ExperimentManifest
{
  std::vector<GroupSpec> groups;
  ReconSettings recon{};
  LossWeights weights = blind_recon_config().loss.weights;
  EagleSpec eagle{};
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (groups.empty()) throw ManifestError("manifest: at least one group is required");
    std::set<std::string> names;
    for (auto const& g : groups) {
      if (g.name.empty()) throw ManifestError("manifest: group name must not be empty");
      if (!names.insert(g.name).second) throw ManifestError("manifest: duplicate group '" + g.name + "'");
      if (g.accelerations.empty()) throw ManifestError("manifest: group '" + g.name + "' has no accelerations");
      for (int r : g.accelerations) {
        if (r != 4 && r != 8 && r != 10) {
          throw ManifestError("manifest: group '" + g.name + "' acceleration " + std::to_string(r) +
                              " is not one of 4, 8, 10");
        }
      }
      try {
        g.phantom.validate();
      } catch (std::invalid_argument const& e) {
        throw ManifestError("manifest: group '" + g.name + "': " + e.what());
      }
    }
    if (!(recon.step_scale > 0.0)) throw ManifestError("manifest: recon.step_scale must be positive");
    try {
      weights.validate();
      eagle.validate();
    } catch (std::invalid_argument const& e) {
      throw ManifestError(std::string("manifest: ") + e.what());
    }
  }
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(ExperimentManifest const& m)
{
  using nlohmann::json;
  json j;
  j["seed"] = m.seed;
  j["output_dir"] = m.output_dir.generic_string();
  j["groups"] = json::array();
  for (auto const& g : m.groups) {
    json jg;
    jg["name"] = g.name;
    jg["phantom"] = {{"height", g.phantom.height}, {"width", g.phantom.width},   {"coils", g.phantom.coils},
                     {"kind", to_string(g.phantom.kind)}, {"frames", g.phantom.frames}};
    if (g.phantom_seed) jg["phantom"]["seed"] = *g.phantom_seed;
    jg["accelerations"] = g.accelerations;
    jg["mask"] = to_string(g.mask_kind);
    jg["acs"] = g.acs_lines;
    if (g.batch_size) jg["batch_size"] = *g.batch_size;
    j["groups"].push_back(jg);
  }
  j["recon"] = {{"method", to_string(m.recon.method)},
                {"iterations", m.recon.iterations},
                {"step_scale", m.recon.step_scale},
                {"tune_step", m.recon.tune_step},
                {"use_ground_truth_losses", m.recon.use_ground_truth_losses},
                {"dc_every", m.recon.dc_every}};
  j["weights"] = {{"fidelity", m.weights.fidelity}, {"ssim", m.weights.ssim}, {"eagle", m.weights.eagle},
                  {"vgg", m.weights.vgg},           {"reg", m.weights.reg},   {"beta", m.weights.beta}};
  j["eagle"] = {{"patch", m.eagle.patch},
                {"kernel_scale", m.eagle.kernel_scale},
                {"filter",
                 {{"kind", to_string(m.eagle.filter.kind)},
                  {"cutoff", m.eagle.filter.cutoff},
                  {"order", m.eagle.filter.order}}}};
  return j;
}

/// Missing keys take the defaults above; unknown keys are rejected.
inline ExperimentManifest manifest_from_json(nlohmann::json const& j)
{
  auto check_keys = [](nlohmann::json const& obj, std::set<std::string> const& allowed, std::string const& where) {
    if (!obj.is_object()) throw ManifestError("manifest: " + where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      if (!allowed.count(it.key())) throw ManifestError("manifest: unknown key '" + it.key() + "' in " + where);
    }
  };
  ExperimentManifest m;
  try {
    check_keys(j, {"seed", "output_dir", "groups", "recon", "weights", "eagle"}, "manifest");
    m.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("output_dir")) m.output_dir = j["output_dir"].get<std::string>();
    if (!j.contains("groups") || !j["groups"].is_array()) throw ManifestError("manifest: 'groups' array is required");
    for (auto const& jg : j["groups"]) {
      check_keys(jg, {"name", "phantom", "accelerations", "mask", "acs", "batch_size"}, "group");
      GroupSpec g;
      g.name = jg.at("name").get<std::string>();
      if (jg.contains("phantom")) {
        auto const& p = jg["phantom"];
        check_keys(p, {"height", "width", "coils", "kind", "frames", "seed"}, "phantom");
        g.phantom.height = p.value("height", g.phantom.height);
        g.phantom.width = p.value("width", g.phantom.width);
        g.phantom.coils = p.value("coils", g.phantom.coils);
        g.phantom.frames = p.value("frames", g.phantom.frames);
        if (p.contains("kind")) g.phantom.kind = parse_phantom_kind(p["kind"].get<std::string>());
        if (p.contains("seed")) g.phantom_seed = p["seed"].get<std::uint64_t>();
      }
      if (jg.contains("accelerations")) g.accelerations = jg["accelerations"].get<std::vector<int>>();
      if (jg.contains("mask")) g.mask_kind = parse_mask_kind(jg["mask"].get<std::string>());
      g.acs_lines = jg.value("acs", g.acs_lines);
      if (jg.contains("batch_size")) g.batch_size = jg["batch_size"].get<int>();
      m.groups.push_back(std::move(g));
    }
    if (j.contains("recon")) {
      auto const& r = j["recon"];
      check_keys(r, {"method", "iterations", "step_scale", "tune_step", "use_ground_truth_losses", "dc_every"},
                 "recon");
      if (r.contains("method")) m.recon.method = parse_recon_method(r["method"].get<std::string>());
      m.recon.iterations = r.value("iterations", m.recon.iterations);
      m.recon.step_scale = r.value("step_scale", m.recon.step_scale);
      m.recon.tune_step = r.value("tune_step", m.recon.tune_step);
      m.recon.use_ground_truth_losses = r.value("use_ground_truth_losses", m.recon.use_ground_truth_losses);
      m.recon.dc_every = r.value("dc_every", m.recon.dc_every);
    }
    if (j.contains("weights")) {
      auto const& w = j["weights"];
      check_keys(w, {"fidelity", "ssim", "eagle", "vgg", "reg", "beta"}, "weights");
      m.weights.fidelity = w.value("fidelity", m.weights.fidelity);
      m.weights.ssim = w.value("ssim", m.weights.ssim);
      m.weights.eagle = w.value("eagle", m.weights.eagle);
      m.weights.vgg = w.value("vgg", m.weights.vgg);
      m.weights.reg = w.value("reg", m.weights.reg);
      m.weights.beta = w.value("beta", m.weights.beta);
    }
    if (j.contains("eagle")) {
      auto const& e = j["eagle"];
      check_keys(e, {"patch", "kernel_scale", "filter"}, "eagle");
      m.eagle.patch = e.value("patch", m.eagle.patch);
      m.eagle.kernel_scale = e.value("kernel_scale", m.eagle.kernel_scale);
      if (e.contains("filter")) {
        auto const& f = e["filter"];
        check_keys(f, {"kind", "cutoff", "order"}, "eagle.filter");
        if (f.contains("kind")) m.eagle.filter.kind = parse_filter_kind(f["kind"].get<std::string>());
        m.eagle.filter.cutoff = f.value("cutoff", m.eagle.filter.cutoff);
        m.eagle.filter.order = f.value("order", m.eagle.filter.order);
      }
    }
  } catch (nlohmann::json::exception const& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  } catch (ManifestError const&) {
    throw;
  } catch (std::invalid_argument const& e) {
    throw ManifestError(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

inline ExperimentManifest load_manifest(std::filesystem::path const& path)
{
  std::string const text = read_file(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (nlohmann::json::exception const& e) {
    throw ManifestError("manifest '" + path.string() + "': " + e.what());
  }
  return manifest_from_json(j);
}

/// Eleven modality/size groups at 8x. Cine sizes are clinical matrix sizes divided by
/// four; the other groups use comparable sizes.
inline ExperimentManifest default_manifest()
{
  struct Entry
  {
    char const* name;
    std::size_t h;
    std::size_t w;
    int batch;
  };
  static constexpr Entry entries[] = {
    {"aorta_sag", 40, 120, 6},   {"aorta_tra", 40, 120, 6},   {"cine_lax204", 51, 112, 4}, {"cine_lax168", 42, 112, 6},
    {"cine_sax246", 62, 128, 4}, {"cine_sax162", 41, 128, 4}, {"cine_sax204", 51, 128, 2}, {"cine_lvot", 51, 112, 6},
    {"T1map", 36, 96, 6},        {"T2map", 36, 96, 10},       {"tagging", 48, 112, 4},
  };
  ExperimentManifest m;
  for (auto const& e : entries) {
    GroupSpec g;
    g.name = e.name;
    g.phantom.height = e.h;
    g.phantom.width = e.w;
    g.accelerations = {8};
    g.batch_size = e.batch;
    m.groups.push_back(std::move(g));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Run

struct ExperimentResult
{
  /// Configured reconstruction, then one totals row per acceleration.
  std::vector<ReportRow> rows;
  /// Zero-filled baseline in the same layout.
  std::vector<ReportRow> baseline;
  double step_scale = 0.0;
};

namespace detail {

inline ReportRow score(std::string const& group, int R, std::size_t slice, RealImage const& image,
                       MultiCoilKSpace const& k_pred, MultiCoilKSpace const& k_full, RealImage const& truth,
                       LossConfig const& cfg)
{
  LossReport const rep = total_loss(k_pred, k_full, image, &truth, cfg);
  ReportRow row;
  row.group = group;
  row.acceleration = R;
  row.slice = std::to_string(slice);
  row.ssim = ssim(image, truth);
  row.psnr = psnr(image, truth);
  row.nmse = nmse(image, truth);
  row.hf_nmse = hf_nmse(image, truth);
  row.eagle = rep.eagle;
  row.fidelity = rep.fidelity;
  row.reg = rep.reg;
  row.total = rep.total;
  return row;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b)
{
  return seed * 0x9e3779b97f4a7c15ULL + a * 1000003ULL + b;
}

} // namespace detail

/// Evaluates every group at every acceleration. A failing group/acceleration becomes an
/// error row and the run continues. Writes report.csv, baseline.csv and
/// manifest.resolved.json under output_dir when it is non-empty.
inline ExperimentResult run_experiment(ExperimentManifest const& manifest)
{
  manifest.validate();
  auto const extractor = ConvStackExtractor::reference();
  LossConfig loss;
  loss.weights = manifest.weights;
  loss.eagle = manifest.eagle;
  loss.extractor = &extractor;

  ExperimentResult out;
  out.step_scale = manifest.recon.step_scale;
  bool tuned = !manifest.recon.tune_step;

  std::map<int, std::vector<ReportRow>> by_r;
  std::map<int, std::vector<ReportRow>> base_by_r;
  for (std::size_t gi = 0; gi < manifest.groups.size(); ++gi) {
    GroupSpec const& g = manifest.groups[gi];
    for (int R : g.accelerations) {
      std::vector<ReportRow> rows;
      std::vector<ReportRow> base;
      try {
        PhantomSpec ps = g.phantom;
        ps.seed = manifest.seed + g.phantom_seed.value_or(gi);
        Phantom const ph = make_phantom(ps);
        std::uint64_t const mseed = detail::mix_seed(manifest.seed, gi, std::uint64_t(R));
        SamplingMask const mask = g.mask_kind == MaskKind::uniform
                                    ? make_uniform_mask(ps.height, ps.width, R, g.acs_lines)
                                    : make_random_mask(ps.height, ps.width, R, g.acs_lines, mseed);
        for (std::size_t f = 0; f < ph.frames.size(); ++f) {
          RealImage const& truth = ph.frames[f];
          MultiCoilKSpace const k_full = simulate_kspace(truth, ph.maps);
          MultiCoilKSpace const y = apply_mask(k_full, mask);
          base.push_back(detail::score(g.name, R, f, zero_filled(y), y, k_full, truth, loss));
          if (manifest.recon.method == ReconMethod::zero_filled) {
            rows.push_back(base.back());
            continue;
          }
          SensitivityMaps const maps = estimate_sens_maps(y, mask);
          ReconConfig cfg;
          cfg.iterations = manifest.recon.iterations;
          cfg.loss = loss;
          cfg.use_ground_truth_losses = manifest.recon.use_ground_truth_losses;
          cfg.dc_every = manifest.recon.dc_every;
          double const base_step = default_step_base(y, cfg);
          if (!tuned) {
            cfg.step = base_step;
            out.step_scale = tune_step(y, mask, maps, cfg, &truth, base_step).best_step / base_step;
            tuned = true;
          }
          cfg.step = base_step * out.step_scale;
          ReconResult const r = gd_reconstruct(y, mask, maps, cfg, &truth);
          rows.push_back(detail::score(g.name, R, f, r.image, simulate_kspace(r.x, maps), k_full, truth, loss));
        }
      } catch (std::exception const& e) {
        rows.clear();
        base.clear();
        ReportRow err;
        err.group = g.name;
        err.acceleration = R;
        err.slice = std::string("error: ") + e.what();
        err.failed = true;
        rows.push_back(err);
        base.push_back(err);
      }
      for (auto& r : rows) out.rows.push_back(r);
      for (auto& r : base) out.baseline.push_back(r);
      auto& dst = by_r[R];
      dst.insert(dst.end(), rows.begin(), rows.end());
      auto& bdst = base_by_r[R];
      bdst.insert(bdst.end(), base.begin(), base.end());
    }
  }
  for (auto const& [R, rows] : by_r) out.rows.push_back(aggregate_rows(rows, "total", R));
  for (auto const& [R, rows] : base_by_r) out.baseline.push_back(aggregate_rows(rows, "total", R));

  if (!manifest.output_dir.empty()) {
    std::filesystem::create_directories(manifest.output_dir);
    write_report(manifest.output_dir / "report.csv", out.rows);
    write_report(manifest.output_dir / "baseline.csv", out.baseline);
    ExperimentManifest resolved = manifest;
    resolved.recon.step_scale = out.step_scale;
    resolved.recon.tune_step = false;
    write_file(manifest.output_dir / "manifest.resolved.json", to_json(resolved).dump(2) + "\n");
  }
  return out;
}

} // namespace ksplab
