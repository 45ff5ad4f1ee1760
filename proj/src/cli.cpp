#include "fpc/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fpc/errors.hpp"
#include "fpc/eval.hpp"
#include "fpc/jacobian_sketch.hpp"
#include "fpc/rdo.hpp"

namespace fpc::cli {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::vector<int> parse_qps(const std::string& s) {
  std::vector<int> qps;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) throw ValidationError("qps: empty entry in list");
    size_t pos = 0;
    int v;
    try {
      v = std::stoi(cur, &pos);
    } catch (const std::exception&) {
      throw ValidationError("qps: not an integer: " + cur);
    }
    if (pos != cur.size()) throw ValidationError("qps: not an integer: " + cur);
    qps.push_back(v);
    cur.clear();
  };
  for (char ch : s) {
    if (ch == ',')
      flush();
    else
      cur.push_back(ch);
  }
  flush();
  return qps;
}

struct MetricArgs {
  std::string metric = "sse";
  std::string weights;
  std::string sketch = "rademacher";
  int ell = 8;
  uint64_t seed = 0;
  std::string tau_policy = "mean-frobenius";
  double tau = 0.0;
  bool tau_set = false;
  std::string lambda_norm = "none";
  double c = 0.85;
  double fd_blend = 1.0;
  int threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--metric", metric, "distortion metric")
        ->check(CLI::IsMember({"sse", "idse", "fd"}))
        ->capture_default_str();
    cmd->add_option("--weights", weights, "network weight file (idse/fd)");
    cmd->add_option("--sketch", sketch, "sketch family")
        ->check(CLI::IsMember({"rademacher", "gaussian", "dcttop16"}))
        ->capture_default_str();
    cmd->add_option("--ell", ell, "sketch rows")->capture_default_str();
    cmd->add_option("--seed", seed, "sketch seed")->capture_default_str();
    cmd->add_option("--tau-policy", tau_policy, "tau selection rule")
        ->check(CLI::IsMember({"mean-frobenius", "rms-frobenius", "explicit"}))
        ->capture_default_str();
    cmd->add_option("--tau", tau, "explicit tau override")->each([this](const std::string&) {
      tau_set = true;
    });
    cmd->add_option("--lambda-norm", lambda_norm, "lambda normalization")
        ->check(CLI::IsMember({"none", "trace"}))
        ->capture_default_str();
    cmd->add_option("--c", c, "lambda constant")->capture_default_str();
    cmd->add_option("--fd-blend", fd_blend, "SSE weight in the FD baseline")
        ->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads for the Jacobian pass")
        ->capture_default_str();
  }

  RDOConfig config(int qp) const {
    RDOConfig cfg;
    cfg.metric = metric_from_string(metric);
    cfg.qp = qp;
    cfg.c = c;
    cfg.lambda_norm = lambda_norm == "trace" ? LambdaNorm::Trace : LambdaNorm::None;
    if (tau_set) {
      cfg.tau_policy = TauPolicy::explicit_value(tau);
    } else if (tau_policy == "explicit") {
      throw ValidationError("tau policy 'explicit' needs --tau");
    } else if (tau_policy == "rms-frobenius") {
      cfg.tau_policy = TauPolicy::rms();
    }
    cfg.fd_blend = fd_blend;
    cfg.threads = threads;
    return cfg;
  }

  bool needs_net() const { return metric != "sse"; }

  std::optional<FeatNet> load_net() const {
    if (weights.empty()) {
      if (needs_net()) throw ValidationError("--weights is required for metric " + metric);
      return std::nullopt;
    }
    return FeatNet::load(weights);
  }
};

Sketch build_sketch(const FeatNet& net, const ImagePlane& plane, const std::string& kind, int ell,
                    uint64_t seed) {
  const FeatureShape fs = net.output_shape(plane.height, plane.width);
  SketchSpec spec;
  spec.kind = sketch_kind_from_string(kind);
  spec.ell = ell;
  spec.seed = seed;
  spec.n_f = fs.count();
  if (spec.kind == SketchKind::DctTop16) return materialize(spec, fs, net.features(plane));
  return materialize(spec);
}

int cmd_encode(const std::string& in, const std::string& out, int qp, const MetricArgs& m,
               const std::string& decisions_csv) {
  const ImagePlane plane = load_pgm(in);
  const std::optional<FeatNet> net = m.load_net();
  const RDOConfig cfg = m.config(qp);
  std::optional<Sketch> sketch;
  if (cfg.metric == MetricTag::Idse) sketch = build_sketch(*net, plane, m.sketch, m.ell, m.seed);

  const EncodeResult res = encode_image(plane, cfg, net ? &*net : nullptr, nullptr,
                                        sketch ? &*sketch : nullptr);
  write_bitstream(res.image, out);
  if (!decisions_csv.empty()) write_decisions_csv(res.decisions, decisions_csv);

  const double pixels = static_cast<double>(plane.orig_width) * plane.orig_height;
  std::cout << "metric=" << m.metric << " qp=" << qp << " bits=" << res.total_bits
            << " bpp=" << fmt(res.total_bits / pixels) << " psnr_db=" << fmt(res.psnr_db)
            << " distortion=" << fmt(res.total_distortion)
            << " lambda_eff=" << fmt(res.lambda_eff) << '\n';
  return 0;
}

int cmd_decode(const std::string& in, const std::string& out) {
  const EncodedImage enc = read_bitstream(in);
  const ImagePlane recon = reconstruct_image(enc);
  save_pgm(recon, out);
  std::cerr << "decoded " << enc.orig_width << "x" << enc.orig_height << " qp="
            << static_cast<int>(enc.qp) << " metric=" << metric_to_string(enc.metric) << '\n';
  return 0;
}

int cmd_sweep(const std::string& in, const std::string& qps_str, const MetricArgs& m,
              const std::string& curve_csv) {
  const ImagePlane plane = load_pgm(in);
  const std::optional<FeatNet> net = m.load_net();
  const RDOConfig cfg = m.config(28);  // per-point QP set below
  std::optional<Sketch> sketch;
  if (net) sketch = build_sketch(*net, plane, m.sketch, m.ell, m.seed);

  const std::vector<int> qps = parse_qps(qps_str);
  const RDCurve curve =
      sweep(plane, cfg, qps, net ? &*net : nullptr, sketch ? &*sketch : nullptr);
  if (!curve_csv.empty()) {
    // Merge with an existing file so one CSV can hold the anchor and test
    // curves that `bdrate` expects: same label replaces, new label appends.
    std::vector<RDCurve> all;
    if (std::filesystem::exists(curve_csv)) all = read_curves_csv(curve_csv);
    std::erase_if(all, [&](const RDCurve& c) { return c.label == curve.label; });
    all.push_back(curve);
    write_curves_csv(all, curve_csv);
  }
  for (const RDPoint& p : curve.points)
    std::cout << "qp=" << p.qp << " bits=" << p.bits << " bpp=" << fmt(p.bpp)
              << " psnr_db=" << fmt(p.psnr_db) << " idse=" << fmt(p.idse)
              << " feat_dist=" << fmt(p.feat_dist) << " flops=" << p.flops << '\n';
  return 0;
}

int cmd_bdrate(const std::string& in, const std::string& anchor, const std::string& test,
               const std::string& axis_str) {
  const std::vector<RDCurve> curves = read_curves_csv(in);
  auto find = [&](const std::string& label) -> const RDCurve& {
    for (const RDCurve& c : curves)
      if (c.label == label) return c;
    throw ValidationError("bdrate: no curve labelled '" + label + "' in input");
  };
  QualityAxis axis;
  if (axis_str == "psnr")
    axis = QualityAxis::Psnr;
  else if (axis_str == "neg-idse")
    axis = QualityAxis::NegIdse;
  else
    axis = QualityAxis::NegFeatDist;
  std::cout << "bd_rate_percent=" << fmt(bd_rate_percent(find(anchor), find(test), axis)) << '\n';
  return 0;
}

int cmd_importance(const std::string& in, const std::string& out, const MetricArgs& m) {
  if (m.weights.empty()) throw ValidationError("--weights is required for importance maps");
  const ImagePlane plane = load_pgm(in);
  const FeatNet net = FeatNet::load(m.weights);
  const Sketch sketch = build_sketch(net, plane, m.sketch, m.ell, m.seed);
  const std::vector<double> full = compute_sketched_jacobian(net, plane, sketch, m.threads);
  const std::vector<double> map =
      importance_map(full, sketch.spec.ell, static_cast<int>(plane.pixel_count()));
  save_importance_pgm(map, plane.width, plane.height, out);
  std::cerr << "wrote " << out << '\n';
  return 0;
}

int cmd_gen_weights(const std::string& out, uint64_t seed, const std::string& arch, double beta) {
  FeatNet net = arch == "softplus" ? FeatNet::softplus_arch(static_cast<float>(beta))
              : arch == "linear"   ? FeatNet::linear_arch()
                                   : FeatNet::default_arch();
  net.init_random(seed);
  net.save(out);
  std::cerr << "wrote " << out << " (" << net.layers().size() << " layers)\n";
  return 0;
}

int cmd_flops(int h, int w, int hr, int wr, int nr, int ell, double cost) {
  const FlopEstimate e = flop_estimate(h, w, hr, wr, nr, ell, cost);
  std::cout << "fd=" << fmt(e.fd) << " idse=" << fmt(e.idse) << " ratio=" << fmt(e.ratio) << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"feature-preserving block codec"};
  app.require_subcommand(1);

  auto* enc = app.add_subcommand("encode", "encode a PGM image");
  std::string enc_in, enc_out, enc_decisions;
  int enc_qp = 28;
  MetricArgs enc_m;
  enc->add_option("--in", enc_in, "input PGM")->required();
  enc->add_option("--out", enc_out, "output bitstream")->required();
  enc->add_option("--qp", enc_qp, "quantization parameter")->capture_default_str();
  enc->add_option("--decisions-csv", enc_decisions, "per-block decision log");
  enc_m.attach(enc);

  auto* dec = app.add_subcommand("decode", "decode a bitstream to PGM");
  std::string dec_in, dec_out;
  dec->add_option("--in", dec_in, "input bitstream")->required();
  dec->add_option("--out", dec_out, "output PGM")->required();

  auto* swp = app.add_subcommand("sweep", "encode across a QP list and report RD points");
  std::string swp_in, swp_qps = "26,28,30,32,34,36", swp_csv;
  MetricArgs swp_m;
  swp->add_option("--in", swp_in, "input PGM")->required();
  swp->add_option("--qps", swp_qps, "comma-separated QP list")->capture_default_str();
  swp->add_option("--curve-csv", swp_csv, "write RD points as CSV");
  swp_m.attach(swp);

  auto* bdr = app.add_subcommand("bdrate", "BD-rate between two curves in a CSV");
  std::string bdr_in, bdr_anchor = "sse", bdr_test = "idse", bdr_axis = "psnr";
  bdr->add_option("--in", bdr_in, "curve CSV")->required();
  bdr->add_option("--anchor", bdr_anchor, "anchor curve label")->capture_default_str();
  bdr->add_option("--test", bdr_test, "test curve label")->capture_default_str();
  bdr->add_option("--axis", bdr_axis, "quality axis")
      ->check(CLI::IsMember({"psnr", "neg-idse", "neg-featdist"}))
      ->capture_default_str();

  auto* imp = app.add_subcommand("importance", "pixel importance map from the sketched Jacobian");
  std::string imp_in, imp_out;
  MetricArgs imp_m;
  imp->add_option("--in", imp_in, "input PGM")->required();
  imp->add_option("--out", imp_out, "output PGM map")->required();
  imp_m.attach(imp);

  auto* gen = app.add_subcommand("gen-weights", "write a randomly initialized network");
  std::string gen_out, gen_arch = "default";
  uint64_t gen_seed = 0;
  double gen_beta = 10.0;
  gen->add_option("--out", gen_out, "output weight file")->required();
  gen->add_option("--seed", gen_seed, "init seed")->capture_default_str();
  gen->add_option("--arch", gen_arch, "architecture")
      ->check(CLI::IsMember({"default", "softplus", "linear"}))
      ->capture_default_str();
  gen->add_option("--beta", gen_beta, "softplus beta")->capture_default_str();

  auto* flp = app.add_subcommand("flops", "complexity model: FD vs sketched IDSE");
  // --h would collide with the default -h help short flag.
  flp->set_help_flag("--help", "print this help message and exit");
  int flp_h = 0, flp_w = 0, flp_hr = 0, flp_wr = 0, flp_nr = 2, flp_ell = 2;
  double flp_cost = 1.0;
  flp->add_option("--h", flp_h, "image height")->required();
  flp->add_option("--w", flp_w, "image width")->required();
  flp->add_option("--hr", flp_hr, "network input height")->required();
  flp->add_option("--wr", flp_wr, "network input width")->required();
  flp->add_option("--nr", flp_nr, "candidates per block")->capture_default_str();
  flp->add_option("--ell", flp_ell, "sketch rows")->capture_default_str();
  flp->add_option("--cost", flp_cost, "per-pixel network cost")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*enc) return cmd_encode(enc_in, enc_out, enc_qp, enc_m, enc_decisions);
    if (*dec) return cmd_decode(dec_in, dec_out);
    if (*swp) return cmd_sweep(swp_in, swp_qps, swp_m, swp_csv);
    if (*bdr) return cmd_bdrate(bdr_in, bdr_anchor, bdr_test, bdr_axis);
    if (*imp) return cmd_importance(imp_in, imp_out, imp_m);
    if (*gen) return cmd_gen_weights(gen_out, gen_seed, gen_arch, gen_beta);
    if (*flp) return cmd_flops(flp_h, flp_w, flp_hr, flp_wr, flp_nr, flp_ell, flp_cost);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace fpc::cli
