#pragma once

#include <ksplab/ksplab.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <ostream>

namespace ksplab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct Streams
{
  std::ostream& out;
  std::ostream& err;
};

namespace detail {

inline std::filesystem::path output_dir(std::string const& flag)
{
  std::filesystem::path dir = flag.empty() ? default_output_dir() : std::filesystem::path(flag);
  std::filesystem::create_directories(dir);
  return dir;
}

inline RealImage magnitude_of(ComplexImage const& z) { return magnitude(z); }

/// Magnitude images per frame: image containers directly, k-space containers via zero-filled RSS.
inline std::vector<RealImage> images_of(KspContainer const& c)
{
  bool const image = c.meta.is_object() && c.meta.value("domain", std::string()) == "image";
  std::vector<RealImage> out;
  for (std::size_t f = 0; f < c.frames(); ++f) {
    Stack<cplx> const s = c.frame(f);
    if (image) {
      if (s.count() != 1) throw FormatError("image container must hold one coil per frame", 16);
      out.push_back(magnitude(s.slice(0)));
    } else {
      out.push_back(zero_filled(s));
    }
  }
  return out;
}

inline KspContainer image_container(std::vector<ComplexImage> const& frames)
{
  if (frames.size() == 1) return KspContainer::from_image(frames[0]);
  std::vector<Stack<cplx>> stacks;
  for (auto const& f : frames) stacks.emplace_back(1, f.height(), f.width(), f.values());
  KspContainer c = KspContainer::from_frames(stacks);
  c.meta["domain"] = "image";
  return c;
}

inline std::string dump_grad(std::vector<double> const& g)
{
  std::string s = "index,value\n";
  for (std::size_t i = 0; i < g.size(); ++i) s += std::to_string(i) + "," + format_double(g[i]) + "\n";
  return s;
}

inline std::string dump_grad(std::vector<cplx> const& g)
{
  std::string s = "index,re,im\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    s += std::to_string(i) + "," + format_double(g[i].real()) + "," + format_double(g[i].imag()) + "\n";
  }
  return s;
}

} // namespace detail

/// Parses argv, runs one subcommand and maps failures to exit codes:
/// 0 success, 1 validation error, 2 runtime or format error.
inline int cli_dispatch(int argc, char const* const* argv, Streams io = {std::cout, std::cerr})
{
  CLI::App app{"k-space simulation, loss evaluation and reconstruction toolkit", "ksplab"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::uint64_t seed = 0;
  std::string out_flag;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
    sub->add_option("--out", out_flag, std::string("Output directory (default $") + kOutputDirEnv + " or ksplab_out)");
  };

  // phantom
  PhantomSpec ps;
  std::string phantom_kind = "cardiac";
  auto* phantom = app.add_subcommand("phantom", "Write a multi-coil phantom k-space container and PGM previews");
  phantom->add_option("--height", ps.height, "Rows")->capture_default_str();
  phantom->add_option("--width", ps.width, "Columns")->capture_default_str();
  phantom->add_option("--coils", ps.coils, "Receive coils")->capture_default_str();
  phantom->add_option("--frames", ps.frames, "Time frames")->capture_default_str();
  phantom->add_option("--kind", phantom_kind, "cardiac or shepp-logan")->capture_default_str();
  add_common(phantom);

  // mask
  std::size_t mh = 128, mw = 128, acs = 16;
  int accel = 8;
  std::string mask_kind = "uniform", axis = "cols", mask_input;
  auto* mask = app.add_subcommand("mask", "Build a line mask; optionally apply it to a k-space container");
  mask->add_option("--height", mh, "Rows (ignored with --input)")->capture_default_str();
  mask->add_option("--width", mw, "Columns (ignored with --input)")->capture_default_str();
  mask->add_option("--accel", accel, "Acceleration factor R")->capture_default_str();
  mask->add_option("--acs", acs, "Fully sampled centre lines")->capture_default_str();
  mask->add_option("--kind", mask_kind, "uniform or random")->capture_default_str();
  mask->add_option("--axis", axis, "Phase-encode axis: cols or rows")->capture_default_str();
  mask->add_option("--input", mask_input, "Fully sampled k-space container to undersample");
  add_common(mask);

  // recon
  std::string recon_input, recon_method = "gd", truth_path;
  std::size_t iterations = 200, dc_every = 0;
  double step_scale = 0.5;
  bool tune = false, recon_unnormalized = false;
  auto* recon = app.add_subcommand("recon", "Reconstruct an undersampled container (mask in its header)");
  recon->add_option("--input", recon_input, "Undersampled k-space container")->required();
  recon->add_option("--method", recon_method, "gd or zero-filled")->capture_default_str();
  recon->add_option("--iterations", iterations, "Gradient steps")->capture_default_str();
  recon->add_option("--step-scale", step_scale, "Step as a multiple of the default step base")->capture_default_str();
  recon->add_flag("--tune", tune, "Pick the step by the 8-candidate probe");
  recon->add_option("--dc-every", dc_every, "Data-consistency period, 0 disables")->capture_default_str();
  recon->add_option("--truth", truth_path, "Ground-truth image container; enables the image-domain terms");
  recon->add_flag("--unnormalized", recon_unnormalized, "Use raw sums instead of element means in every loss");
  add_common(recon);

  // eval
  std::string eval_image, eval_ref, eval_group = "default", eval_csv;
  auto* eval = app.add_subcommand("eval", "Score reconstructed images against a reference");
  eval->add_option("--image", eval_image, "Image or k-space container to score")->required();
  eval->add_option("--ref", eval_ref, "Reference image or k-space container")->required();
  eval->add_option("--group", eval_group, "Group label for the rows")->capture_default_str();
  eval->add_option("--csv", eval_csv, "CSV path (default <out>/eval.csv)");
  add_common(eval);

  // loss
  std::string loss_component = "total", loss_pred, loss_target, grad_out;
  bool loss_unnormalized = false;
  auto* loss = app.add_subcommand("loss", "Evaluate one loss component or the weighted total");
  loss->add_option("--component", loss_component, "fidelity, ssim, eagle, vgg, reg or total")->capture_default_str();
  loss->add_option("--pred", loss_pred, "Predicted k-space container")->required();
  loss->add_option("--target", loss_target, "Target k-space container")->required();
  loss->add_option("--grad-out", grad_out, "Write the gradient as CSV");
  loss->add_flag("--unnormalized", loss_unnormalized, "Raw sums instead of element means (SSIM is always a mean)");
  add_common(loss);

  // filter-viz
  HighPassSpec fspec;
  std::string filter_kind = "butterworth", filter_path;
  std::size_t fsize = 64;
  auto* fviz = app.add_subcommand("filter-viz", "Render a high-pass response as a 16-bit PGM");
  fviz->add_option("--kind", filter_kind, "butterworth or gaussian")->capture_default_str();
  fviz->add_option("--cutoff", fspec.cutoff, "Cutoff in cycles per sample, (0, 0.5]")->capture_default_str();
  fviz->add_option("--order", fspec.order, "Butterworth order")->capture_default_str();
  fviz->add_option("--size", fsize, "Square grid size")->capture_default_str();
  fviz->add_option("--file", filter_path, "PGM path (default <out>/filter.pgm)");
  add_common(fviz);

  // gradcheck
  std::string gc_loss = "eagle";
  std::size_t gc_size = 20, gc_samples = 64;
  std::optional<double> gc_eps, gc_tol;
  auto* gcheck = app.add_subcommand("gradcheck", "Compare an analytic gradient with central differences");
  gcheck->add_option("--loss", gc_loss, "fidelity, ssim, eagle, perceptual, reg or total")->capture_default_str();
  gcheck->add_option("--size", gc_size, "Problem size (pixels per side)")->capture_default_str();
  gcheck->add_option("--samples", gc_samples, "Coordinates probed")->capture_default_str();
  gcheck->add_option("--eps", gc_eps, "Finite-difference step");
  gcheck->add_option("--tol", gc_tol, "Relative error tolerance");
  add_common(gcheck);

  // experiment
  std::string manifest_path;
  bool print_default = false;
  auto* exper = app.add_subcommand("experiment", "Run the grouped evaluation harness");
  exper->add_option("--manifest", manifest_path, "Manifest JSON (default: built-in 11-group manifest)");
  exper->add_flag("--print-default", print_default, "Print the built-in manifest and exit");
  add_common(exper);

  if (argc <= 1) {
    io.err << app.help();
    return kExitValidation;
  }
  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const&) {
    io.out << app.help();
    return kExitOk;
  } catch (CLI::CallForAllHelp const&) {
    io.out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (CLI::ParseError const& e) {
    io.err << "error: " << e.what() << "\n";
    // Help for the failing subcommand when one was selected, top-level usage otherwise.
    auto subs = app.get_subcommands();
    io.err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  try {
    if (phantom->parsed()) {
      ps.seed = seed;
      ps.kind = parse_phantom_kind(phantom_kind);
      Phantom const ph = make_phantom(ps);
      auto const dir = detail::output_dir(out_flag);
      std::vector<Stack<cplx>> frames;
      for (auto const& f : ph.frames) frames.push_back(simulate_kspace(f, ph.maps));
      KspContainer k = ps.frames == 1 ? KspContainer::from_stack(frames[0]) : KspContainer::from_frames(frames);
      k.meta = {{"domain", "kspace"}, {"phantom", to_string(ps.kind)}, {"seed", seed}};
      write_ksp(dir / "kspace.ksp", k);
      KspContainer maps = KspContainer::from_stack(ph.maps);
      maps.meta = {{"domain", "maps"}};
      write_ksp(dir / "maps.ksp", maps);
      std::vector<ComplexImage> truth;
      for (std::size_t f = 0; f < ph.frames.size(); ++f) {
        truth.push_back(to_complex(ph.frames[f]));
        write_pgm(dir / ("truth_" + std::to_string(f) + ".pgm"), ph.frames[f], {PgmScaling::fixed_range, 0.0, 1.0});
      }
      write_ksp(dir / "truth.ksp", detail::image_container(truth));
      io.out << "wrote " << (dir / "kspace.ksp").string() << " " << ps.coils << "x" << ps.height << "x" << ps.width
             << " frames=" << ps.frames << "\n";
      return kExitOk;
    }

    if (mask->parsed()) {
      std::optional<KspContainer> input;
      if (!mask_input.empty()) {
        input = read_ksp(mask_input);
        mh = input->height();
        mw = input->width();
      }
      PhaseAxis const ax = parse_phase_axis(axis);
      SamplingMask const m = parse_mask_kind(mask_kind) == MaskKind::uniform
                               ? make_uniform_mask(mh, mw, accel, acs, ax)
                               : make_random_mask(mh, mw, accel, acs, seed, ax);
      auto const dir = detail::output_dir(out_flag);
      write_mask_text(dir / "mask.txt", m);
      if (input) {
        std::vector<Stack<cplx>> frames;
        for (std::size_t f = 0; f < input->frames(); ++f) frames.push_back(apply_mask(input->frame(f), m));
        KspContainer masked = input->frames() == 1 && input->shape.size() == 3 ? KspContainer::from_stack(frames[0])
                                                                               : KspContainer::from_frames(frames);
        masked.meta = input->meta;
        masked.mask = m;
        write_ksp(dir / "masked.ksp", masked);
      }
      io.out << "lines=" << m.sampled_lines() << " of " << m.axis_length()
             << " fraction=" << format_double(m.sampling_fraction()) << "\n";
      return kExitOk;
    }

    if (recon->parsed()) {
      KspContainer const in = read_ksp(recon_input);
      if (!in.mask) throw std::invalid_argument("recon: input container carries no mask");
      std::optional<std::vector<RealImage>> truth;
      if (!truth_path.empty()) truth = detail::images_of(read_ksp(truth_path));
      ReconConfig cfg = blind_recon_config();
      cfg.method = parse_recon_method(recon_method);
      cfg.iterations = iterations;
      cfg.dc_every = dc_every;
      if (recon_unnormalized) cfg.loss.reduction = Reduction::sum;
      auto const extractor = ConvStackExtractor::reference();
      cfg.loss.extractor = &extractor;
      cfg.use_ground_truth_losses = truth.has_value();
      if (truth && truth->size() != in.frames()) throw std::invalid_argument("recon: truth frame count differs");
      if (!(step_scale > 0.0)) throw std::invalid_argument("recon: --step-scale must be positive");

      auto const dir = detail::output_dir(out_flag);
      std::vector<ComplexImage> images;
      std::string trace = "frame,iteration,fidelity,ssim,eagle,vgg,reg,total,unsampled_norm\n";
      for (std::size_t f = 0; f < in.frames(); ++f) {
        MultiCoilKSpace const y = in.frame(f);
        RealImage const* gt = truth ? &(*truth)[f] : nullptr;
        if (cfg.method == ReconMethod::zero_filled) {
          images.push_back(to_complex(zero_filled(y)));
          continue;
        }
        SensitivityMaps const maps = estimate_sens_maps(y, *in.mask);
        double const base = default_step_base(y, cfg);
        cfg.step = tune ? tune_step(y, *in.mask, maps, cfg, gt, base).best_step : base * step_scale;
        ReconResult const r = gd_reconstruct(y, *in.mask, maps, cfg, gt);
        for (auto const& rec : r.trace) {
          auto const& p = rec.report;
          trace += std::to_string(f) + "," + std::to_string(rec.iteration);
          for (double v : {p.fidelity, p.ssim, p.eagle, p.vgg, p.reg, p.total, rec.unsampled_norm}) {
            trace += "," + format_double(v);
          }
          trace += "\n";
        }
        images.push_back(to_complex(r.image));
      }
      write_ksp(dir / "recon.ksp", detail::image_container(images));
      write_pgm(dir / "recon.pgm", real_part(images[0]));
      write_file(dir / "trace.csv", trace);
      io.out << "wrote " << (dir / "recon.ksp").string() << " method=" << to_string(cfg.method) << "\n";
      return kExitOk;
    }

    if (eval->parsed()) {
      auto const imgs = detail::images_of(read_ksp(eval_image));
      auto const refs = detail::images_of(read_ksp(eval_ref));
      if (imgs.size() != refs.size()) throw std::invalid_argument("eval: frame counts differ");
      std::string csv = "group,slice,ssim,psnr,nmse,hf_nmse\r\n";
      double sums[4] = {0, 0, 0, 0};
      for (std::size_t f = 0; f < imgs.size(); ++f) {
        double const v[4] = {ssim(imgs[f], refs[f]), psnr(imgs[f], refs[f]), nmse(imgs[f], refs[f]),
                             hf_nmse(imgs[f], refs[f])};
        csv += csv_field(eval_group) + "," + std::to_string(f);
        for (int i = 0; i < 4; ++i) {
          csv += "," + format_double(v[i]);
          sums[i] += v[i];
        }
        csv += "\r\n";
      }
      csv += csv_field(eval_group) + ",all";
      for (double s : sums) csv += "," + format_double(s / double(imgs.size()));
      csv += "\r\n";
      std::filesystem::path const path =
        eval_csv.empty() ? detail::output_dir(out_flag) / "eval.csv" : std::filesystem::path(eval_csv);
      write_file(path, csv);
      io.out << csv;
      return kExitOk;
    }

    if (loss->parsed()) {
      KspContainer const a = read_ksp(loss_pred);
      KspContainer const b = read_ksp(loss_target);
      if (a.shape != b.shape) throw std::invalid_argument("loss: container shapes differ");
      MultiCoilKSpace const kp = a.frame(0);
      MultiCoilKSpace const kt = b.frame(0);
      RealImage const ip = detail::images_of(a)[0];
      RealImage const it = detail::images_of(b)[0];
      auto const extractor = ConvStackExtractor::reference();
      LossConfig cfg;
      cfg.extractor = &extractor;
      cfg.reduction = loss_unnormalized ? Reduction::sum : Reduction::mean;
      Reduction const red = cfg.reduction;
      bool const want_grad = !grad_out.empty();
      double value = 0.0;
      std::string grad;
      if (loss_component == "fidelity") {
        auto const r = fidelity_loss(kp, kt, want_grad, red);
        value = r.value;
        if (r.grad) grad = detail::dump_grad(r.grad->values());
      } else if (loss_component == "reg") {
        auto const r = reg_loss(kp, cfg.weights.beta, want_grad, red);
        value = r.value;
        if (r.grad) grad = detail::dump_grad(r.grad->values());
      } else if (loss_component == "ssim" || loss_component == "eagle" || loss_component == "vgg") {
        LossValue<RealImage> r;
        if (loss_component == "ssim") r = ssim_loss(ip, it, want_grad);
        else if (loss_component == "eagle") r = eagle_loss(ip, it, cfg.eagle, want_grad, red);
        else r = perceptual_loss(ip, it, &extractor, want_grad, red);
        value = r.value;
        if (r.grad) grad = detail::dump_grad(r.grad->values());
      } else if (loss_component == "total") {
        LossReport const r = total_loss(kp, kt, ip, &it, cfg);
        value = r.total;
        if (want_grad) grad = detail::dump_grad(total_loss_wrt_kspace(kp, kt, &it, cfg, true).grad_kspace->values());
      } else {
        throw std::invalid_argument("loss: unknown component '" + loss_component + "'");
      }
      io.out << loss_component << "," << format_double(value) << "\n";
      if (want_grad) write_file(grad_out, grad);
      return kExitOk;
    }

    if (fviz->parsed()) {
      fspec.kind = parse_filter_kind(filter_kind);
      fspec.validate();
      if (fsize < 1) throw std::invalid_argument("filter-viz: --size must be positive");
      RealImage const h = highpass_filter(fsize, fsize, fspec);
      std::filesystem::path const path =
        filter_path.empty() ? detail::output_dir(out_flag) / "filter.pgm" : std::filesystem::path(filter_path);
      write_pgm(path, h, {PgmScaling::fixed_range, 0.0, 1.0});
      io.out << "wrote " << path.string() << " H(center)=" << format_double(h(fsize / 2, fsize / 2)) << "\n";
      return kExitOk;
    }

    if (gcheck->parsed()) {
      LossSelector const sel = parse_loss_selector(gc_loss);
      if (gc_size < (sel == LossSelector::fidelity || sel == LossSelector::reg ? 1u : 11u)) {
        throw std::invalid_argument("gradcheck: --size too small for this loss");
      }
      GradCheckReport const r = run_gradcheck(sel, gc_size, seed, gc_eps, gc_tol, gc_samples);
      io.out << "loss=" << gc_loss << " size=" << gc_size << " seed=" << seed
             << " max_rel_error=" << format_double(r.max_rel_error) << " checked=" << r.checked
             << " excluded=" << r.excluded << " " << (r.pass ? "PASS" : "FAIL") << "\n";
      return r.pass ? kExitOk : kExitRuntime;
    }

    if (exper->parsed()) {
      if (print_default) {
        io.out << to_json(default_manifest()).dump(2) << "\n";
        return kExitOk;
      }
      ExperimentManifest m = manifest_path.empty() ? default_manifest() : load_manifest(manifest_path);
      if (exper->count("--seed") > 0) m.seed = seed;
      if (!out_flag.empty() || m.output_dir.empty()) m.output_dir = detail::output_dir(out_flag);
      ExperimentResult const r = run_experiment(m);
      std::size_t failed = 0;
      for (auto const& row : r.rows) failed += row.failed ? 1 : 0;
      io.out << "wrote " << (m.output_dir / "report.csv").string() << " rows=" << r.rows.size()
             << " failed=" << failed << "\n";
      return kExitOk;
    }
  } catch (FormatError const& e) {
    io.err << "format error: " << e.what() << "\n";
    return kExitRuntime;
  } catch (std::invalid_argument const& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (std::out_of_range const& e) {
    io.err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (std::exception const& e) {
    io.err << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitValidation;
}

} // namespace ksplab::cli
