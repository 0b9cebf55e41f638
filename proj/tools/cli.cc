#include "cli.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "boxforge/anchor_grid.h"
#include "boxforge/annotation_io.h"
#include "boxforge/errors.h"
#include "boxforge/matcher.h"
#include "boxforge/multibox_loss.h"
#include "boxforge/postprocess.h"
#include "boxforge/voc_eval.h"
#include "fixtures.h"
#include "json.hpp"

namespace boxforge::tools {
namespace {

constexpr std::uint64_t kDefaultSeed = 109;

DetectorSpec LoadSpec(const std::string& spec) {
  if (spec == "canonical") return CanonicalSpec();
  return DetectorSpecFromJson(ReadFile(spec));
}

AnnotationCorpus LoadCorpus(const std::string& path) {
  return ParseCorpus(ReadFile(path));
}

unsigned ThreadBudget() {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("BOXFORGE_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || cap < 1) {
      throw ValidationError("BOXFORGE_THREADS must be a positive integer");
    }
    threads = std::min(threads, static_cast<unsigned>(cap));
  }
  return threads;
}

// The page addressed by --volume/--page, or the first regular page.
struct PageRef {
  const Volume* volume = nullptr;
  const Page* page = nullptr;
};

PageRef SelectPage(const AnnotationCorpus& corpus, const std::string& volume,
                   const std::optional<int>& page_id) {
  for (const Volume& v : corpus.volumes) {
    if (!volume.empty() && v.title != volume) continue;
    for (const Page& p : v.pages) {
      if (page_id ? p.page_id == *page_id : !p.irregular) return {&v, &p};
    }
  }
  throw ValidationError("no matching page in the annotation corpus");
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string Millions(std::int64_t n) {
  return Fixed(static_cast<double>(n) / 1e6, 1) + " M";
}

struct Options {
  // shared
  std::string spec = "canonical";
  std::string annotations;
  std::string format = "table";
  bool include_irregular = false;
  std::uint64_t seed = kDefaultSeed;
  // anchors
  std::string dump;
  // assign
  std::string regime = "standard";
  std::string report;
  double match_iou = 0.5;
  bool no_force = false;
  // loss / detect
  std::string pred;
  std::string volume;
  std::optional<int> page;
  std::vector<double> weights = {0.2, 0.2, 0.4, 0.2};
  double negative_ratio = 3.0;
  double score_threshold = 0.01;
  double nms_iou = 0.45;
  std::size_t top_k = 200;
  std::string out;
  // eval
  std::string detections;
  bool per_volume = false;
  double eval_iou = 0.5;
  std::string interpolation = "all_point";
  bool prf = false;
  // demo
  int pages = 20;
};

MatcherConfig MatcherFrom(const Options& o, const DetectorSpec& spec) {
  MatcherConfig cfg;
  cfg.iou_threshold = o.match_iou;
  cfg.force_best_match = !o.no_force;
  cfg.num_categories = spec.num_categories;
  cfg.Validate();
  return cfg;
}

void WriteOrPrint(const std::string& path, const std::string& text,
                  std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
  } else {
    WriteFile(path, text);
  }
}

int RunAnchors(const Options& o, std::ostream& out) {
  const DetectorSpec spec = LoadSpec(o.spec);
  const AnchorSet anchors = GenerateAnchors(spec);
  out << "K = " << anchors.size() << "\n";
  for (std::size_t i = 0; i < spec.num_feature_maps(); ++i) {
    out << "  map " << i + 1 << ": g=" << spec.grid_sizes[i]
        << " k=" << spec.shapes_per_cell[i]
        << " anchors=" << spec.layer_anchor_count(i)
        << " offset=" << anchors.layer_offsets[i] << "\n";
  }
  if (!o.dump.empty()) WriteFile(o.dump, AnchorSetToJson(anchors));
  return kExitOk;
}

int RunParams(const Options& o, std::ostream& out) {
  const DetectorSpec spec = LoadSpec(o.spec);
  const auto base = CountParameters(spec, HeadKind::kBaseline);
  const auto fork = CountParameters(spec, HeadKind::kFork);
  const auto naive = CountParameters(spec, HeadKind::kNaiveReplication);
  if (o.format == "json") {
    nlohmann::ordered_json doc;
    doc["baseline"] = base;
    doc["fork"] = fork;
    doc["naive_replication"] = naive;
    out << doc.dump(2) << "\n";
    return kExitOk;
  }
  out << "baseline           " << base << "  (" << Millions(base) << ")\n";
  out << "fork               " << fork << "  (" << Millions(fork) << ")\n";
  out << "naive replication  " << naive << "  (" << Millions(naive) << ")\n";
  return kExitOk;
}

int RunAssign(const Options& o, std::ostream& out) {
  const DetectorSpec spec = LoadSpec(o.spec);
  const MatcherConfig cfg = MatcherFrom(o, spec);
  const Regime regime = o.regime == "fork" ? Regime::kFork : Regime::kStandard;
  const AnnotationCorpus corpus = LoadCorpus(o.annotations);
  const ConflictReport report = BuildConflictReport(
      corpus, GenerateAnchors(spec), cfg, o.include_irregular, ThreadBudget());
  const std::string json = ConflictReportToJson(report, regime);
  if (o.report.empty()) {
    out << json;
  } else {
    WriteFile(o.report, json);
    out << o.regime << ": " << report.unassigned(regime) << " of "
        << report.n_gt() << " objects unassigned on " << report.pages.size()
        << " pages\n";
  }
  return kExitOk;
}

int RunLoss(const Options& o, std::ostream& out) {
  const DetectorSpec spec = LoadSpec(o.spec);
  const PredictionSet pred = PredictionSetFromJson(ReadFile(o.pred));
  const AnnotationCorpus corpus = LoadCorpus(o.annotations);
  const PageRef ref = SelectPage(corpus, o.volume, o.page);
  const AnchorSet anchors = GenerateAnchors(spec);
  const MatcherConfig mcfg = MatcherFrom(o, spec);
  const std::vector<GtObject> gts = NormalizedObjects(*ref.page);

  LossConfig cfg;
  cfg.weights = o.weights;
  cfg.negative_ratio = o.negative_ratio;
  cfg.variances = spec.variances;
  MatchResult match =
      pred.mode == HeadMode::kFork
          ? MatchForked(gts, ForkedAnchorSet{anchors, spec.num_categories}, mcfg)
          : MatchStandard(gts, anchors, mcfg);
  const LossBreakdown loss = ComputeLoss(pred, match, gts, anchors, cfg);
  out << LossBreakdownToJson(loss, pred.mode);
  return kExitOk;
}

int RunDetect(const Options& o, std::ostream& out) {
  const DetectorSpec spec = LoadSpec(o.spec);
  const PredictionSet pred = PredictionSetFromJson(ReadFile(o.pred));
  const AnnotationCorpus corpus = LoadCorpus(o.annotations);
  const PageRef ref = SelectPage(corpus, o.volume, o.page);
  PostConfig cfg;
  cfg.score_threshold = o.score_threshold;
  cfg.nms_iou = o.nms_iou;
  cfg.top_k = o.top_k;
  const std::vector<Detection> dets =
      Detect(pred, GenerateAnchors(spec), cfg, spec.variances);
  std::vector<PageDetection> placed;
  for (const Detection& d : dets) {
    placed.push_back({ref.volume->title, ref.page->page_id,
                      {Denormalize(d.box, ref.page->width, ref.page->height),
                       d.category, d.score}});
  }
  WriteOrPrint(o.out, WriteDetectionsJsonl(placed), out);
  return kExitOk;
}

int RunEval(const Options& o, std::ostream& out, std::ostream& err) {
  const AnnotationCorpus corpus = LoadCorpus(o.annotations);
  const std::vector<PageDetection> dets = ReadDetectionsJsonl(ReadFile(o.detections));
  EvalConfig cfg;
  cfg.iou_threshold = o.eval_iou;
  cfg.interpolation = o.interpolation == "eleven_point" ? Interpolation::kElevenPoint
                                                        : Interpolation::kAllPoint;
  cfg.include_irregular = o.include_irregular;
  const EvalResult result = MeanAp(dets, corpus, cfg, o.per_volume);
  for (const std::string& w : result.warnings) err << "warning: " << w << "\n";
  std::vector<PrfResult> prf;
  if (o.prf) prf = PrfPerCategory(dets, corpus, cfg);
  if (o.format == "json") {
    out << EvalResultToJson(result, o.prf ? &prf : nullptr);
  } else {
    out << FormatEvalTable(result);
    if (o.prf) out << FormatPrfTable(prf);
  }
  return kExitOk;
}

void PrintStats(const CorpusStats& s, const std::string& format, std::ostream& out) {
  if (format == "json") {
    nlohmann::ordered_json doc;
    doc["volumes"] = s.volumes;
    doc["pages"] = s.pages;
    for (int c = 0; c < kNumCategories; ++c) {
      doc[std::string(CategoryName(c))] = s.objects[static_cast<std::size_t>(c)];
    }
    doc["total"] = s.total_objects();
    doc["unique_character_names"] = s.unique_character_names;
    doc["text_letters"] = s.text_letters;
    out << doc.dump(2) << "\n";
    return;
  }
  out << "volumes  " << s.volumes << "\n";
  out << "pages    " << s.pages << "\n";
  for (int c = 0; c < kNumCategories; ++c) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%-9s", std::string(CategoryName(c)).c_str());
    out << buf << s.objects[static_cast<std::size_t>(c)] << "\n";
  }
  out << "total    " << s.total_objects() << "\n";
  out << "characters " << s.unique_character_names << "\n";
  out << "letters  " << s.text_letters << "\n";
}

int RunStats(const Options& o, std::ostream& out) {
  PrintStats(ComputeStats(LoadCorpus(o.annotations), o.include_irregular),
             o.format, out);
  return kExitOk;
}

int RunDemoConflict(const Options& o, std::ostream& out) {
  if (o.pages < 1) throw ValidationError("--pages must be at least 1");
  const DetectorSpec spec = LoadSpec(o.spec);
  MatcherConfig cfg = MatcherFrom(o, spec);
  const AnnotationCorpus corpus = ConflictDemoCorpus(o.pages, o.seed);
  const ConflictReport report = BuildConflictReport(
      corpus, GenerateAnchors(spec), cfg, false, ThreadBudget());
  if (o.format == "json") {
    nlohmann::ordered_json doc;
    doc["seed"] = o.seed;
    doc["pages"] = report.pages.size();
    for (std::size_t c = 0; c < report.totals.size(); ++c) {
      doc["per_category"][std::string(CategoryName(static_cast<int>(c)))] = {
          {"n_gt", report.totals[c].n_gt},
          {"unassigned_standard", report.totals[c].unassigned_standard},
          {"unassigned_fork", report.totals[c].unassigned_fork}};
    }
    doc["total"] = {{"n_gt", report.n_gt()},
                    {"unassigned_standard", report.unassigned(Regime::kStandard)},
                    {"unassigned_fork", report.unassigned(Regime::kFork)}};
    out << doc.dump(2) << "\n";
    return kExitOk;
  }
  out << "# " << report.pages.size()
      << " synthetic pages, frame and body share one box (seed " << o.seed << ")\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-10s%8s%12s%8s\n", "category", "objects",
                "standard", "fork");
  out << buf;
  for (std::size_t c = 0; c < report.totals.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%-10s%8zu%12zu%8zu\n",
                  std::string(CategoryName(static_cast<int>(c))).c_str(),
                  report.totals[c].n_gt, report.totals[c].unassigned_standard,
                  report.totals[c].unassigned_fork);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "%-10s%8zu%12zu%8zu\n", "total", report.n_gt(),
                report.unassigned(Regime::kStandard), report.unassigned(Regime::kFork));
  out << buf;
  out << "(columns: objects left without any anchor)\n";
  return kExitOk;
}

}  // namespace

int RunCli(const std::vector<std::string>& args, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"boxforge: anchor assignment, multibox loss and VOC evaluation "
               "for comic object detection"};
  app.require_subcommand(1);
  Options o;

  auto spec_opt = [&](CLI::App* sub) {
    sub->add_option("--spec", o.spec, "\"canonical\" or a detector spec JSON file")
        ->capture_default_str();
  };
  auto threshold_check = CLI::Range(0.0, 1.0);

  auto* anchors = app.add_subcommand("anchors", "Generate the anchor set");
  spec_opt(anchors);
  anchors->add_option("--dump", o.dump, "Write anchors as JSON");

  auto* params = app.add_subcommand("params", "Count detector parameters");
  spec_opt(params);
  params->add_option("--format", o.format)->check(CLI::IsMember({"table", "json"}));

  auto match_opts = [&](CLI::App* sub) {
    sub->add_option("--match-iou", o.match_iou, "IoU threshold for assignment")
        ->check(threshold_check)
        ->capture_default_str();
    sub->add_flag("--no-force-best-match", o.no_force,
                  "Do not let each object claim its best anchor");
  };

  auto* assign = app.add_subcommand("assign", "Report objects left without anchors");
  spec_opt(assign);
  assign->add_option("--annotations", o.annotations)->required();
  assign->add_option("--regime", o.regime)
      ->check(CLI::IsMember({"standard", "fork"}))
      ->capture_default_str();
  assign->add_option("--report", o.report, "Write the JSON report here");
  assign->add_flag("--include-irregular", o.include_irregular);
  match_opts(assign);

  auto page_opts = [&](CLI::App* sub) {
    sub->add_option("--volume", o.volume, "Volume title (default: first)");
    sub->add_option("--page", o.page, "Page id (default: first regular page)");
  };

  auto* loss = app.add_subcommand("loss", "Evaluate the multibox loss");
  spec_opt(loss);
  loss->add_option("--pred", o.pred)->required();
  loss->add_option("--annotations", o.annotations)->required();
  page_opts(loss);
  loss->add_option("--weights", o.weights, "Per-category weights")
      ->delimiter(',')
      ->capture_default_str();
  loss->add_option("--negative-ratio", o.negative_ratio)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  match_opts(loss);

  auto* detect = app.add_subcommand("detect", "Decode, score and suppress predictions");
  spec_opt(detect);
  detect->add_option("--pred", o.pred)->required();
  detect->add_option("--annotations", o.annotations, "Corpus giving the page size")
      ->required();
  page_opts(detect);
  detect->add_option("--score-threshold", o.score_threshold)
      ->check(threshold_check)
      ->capture_default_str();
  detect->add_option("--nms-iou", o.nms_iou)->check(threshold_check)->capture_default_str();
  detect->add_option("--top-k", o.top_k)->capture_default_str();
  detect->add_option("--out", o.out, "JSON-lines output (default: stdout)");

  auto* eval = app.add_subcommand("eval", "PASCAL VOC AP/mAP of detections");
  eval->add_option("--annotations", o.annotations)->required();
  eval->add_option("--detections", o.detections)->required();
  eval->add_flag("--per-volume", o.per_volume);
  eval->add_option("--format", o.format)->check(CLI::IsMember({"table", "json"}));
  eval->add_option("--iou", o.eval_iou)->check(threshold_check)->capture_default_str();
  eval->add_option("--interpolation", o.interpolation)
      ->check(CLI::IsMember({"all_point", "eleven_point"}))
      ->capture_default_str();
  eval->add_flag("--prf", o.prf, "Also report R/P/F at the best threshold");
  eval->add_flag("--include-irregular", o.include_irregular);

  auto* stats = app.add_subcommand("stats", "Corpus statistics");
  stats->add_option("--annotations", o.annotations)->required();
  stats->add_flag("--include-irregular", o.include_irregular);
  stats->add_option("--format", o.format)->check(CLI::IsMember({"table", "json"}));

  auto* demo = app.add_subcommand(
      "demo-conflict", "Standard vs forked assignment on overlapped synthetic pages");
  spec_opt(demo);
  demo->add_option("--seed", o.seed)->capture_default_str();
  demo->add_option("--pages", o.pages)->capture_default_str();
  demo->add_option("--format", o.format)->check(CLI::IsMember({"table", "json"}));
  match_opts(demo);

  std::vector<std::string> rest(args.rbegin(), args.rend());
  if (!rest.empty()) rest.pop_back();  // program name
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitValidation;
  }

  try {
    if (*anchors) return RunAnchors(o, out);
    if (*params) return RunParams(o, out);
    if (*assign) return RunAssign(o, out);
    if (*loss) return RunLoss(o, out);
    if (*detect) return RunDetect(o, out);
    if (*eval) return RunEval(o, out, err);
    if (*stats) return RunStats(o, out);
    if (*demo) return RunDemoConflict(o, out);
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace boxforge::tools
