#include "reference/generators.h"

#include <algorithm>
#include <string>

namespace boxforge::testing {

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int UniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

BBox RandomBox(Rng& rng, double extent, double min_side, double max_side) {
  const double w = Uniform(rng, min_side, max_side) * extent;
  const double h = Uniform(rng, min_side, max_side) * extent;
  const double x = Uniform(rng, 0, extent - w);
  const double y = Uniform(rng, 0, extent - h);
  return {x, y, x + w, y + h};
}

AnchorSet RandomAnchors(Rng& rng, int count) {
  AnchorSet set;
  for (int i = 0; i < count; ++i) set.anchors.push_back(RandomBox(rng, 1.0, 0.05, 0.7));
  set.layer_offsets = {0};
  return set;
}

std::vector<GtObject> RandomGts(Rng& rng, int count, int num_categories) {
  std::vector<GtObject> gts;
  for (int i = 0; i < count; ++i) {
    GtObject g;
    g.id = i;
    g.category = UniformInt(rng, 0, num_categories - 1);
    const int mode = gts.empty() ? 0 : UniformInt(rng, 0, 3);
    const BBox& prev = gts.empty() ? g.box : gts[static_cast<std::size_t>(
                                                 UniformInt(rng, 0, i - 1))].box;
    if (mode == 1) {
      g.box = prev;  // co-located copy
    } else if (mode == 2) {
      const double dx = Uniform(rng, -0.02, 0.02), dy = Uniform(rng, -0.02, 0.02);
      g.box = {std::clamp(prev.x_min + dx, 0.0, 0.9), std::clamp(prev.y_min + dy, 0.0, 0.9),
               0, 0};
      g.box.x_max = std::min(1.0, g.box.x_min + prev.width());
      g.box.y_max = std::min(1.0, g.box.y_min + prev.height());
    } else {
      g.box = RandomBox(rng, 1.0, 0.03, 0.8);
    }
    gts.push_back(g);
  }
  return gts;
}

PredictionSet RandomPredictions(Rng& rng, HeadMode mode, std::size_t num_anchors,
                                int num_categories, double loc_scale,
                                double conf_scale) {
  PredictionSet p = PredictionSet::Zeros(mode, num_anchors, num_categories);
  for (double& v : p.loc) v = Uniform(rng, -loc_scale, loc_scale);
  for (double& v : p.conf) v = Uniform(rng, -conf_scale, conf_scale);
  return p;
}

std::vector<Detection> RandomDetections(Rng& rng, int count, int category) {
  std::vector<Detection> dets;
  for (int i = 0; i < count; ++i) {
    Detection d;
    d.category = category;
    d.box = RandomBox(rng, 1.0, 0.05, 0.5);
    // Coarse grid so equal scores happen.
    d.score = UniformInt(rng, 1, 20) / 20.0;
    if (!dets.empty() && UniformInt(rng, 0, 4) == 0) {
      const BBox& b = dets[static_cast<std::size_t>(UniformInt(rng, 0, i - 1))].box;
      const double s = Uniform(rng, -0.05, 0.05);
      d.box = {std::max(0.0, b.x_min + s), std::max(0.0, b.y_min + s),
               std::min(1.0, b.x_max + s), std::min(1.0, b.y_max + s)};
    }
    dets.push_back(d);
  }
  return dets;
}

ApInstance RandomApInstance(Rng& rng, int max_dets, int max_gts) {
  ApInstance inst;
  const int pages = UniformInt(rng, 1, 3);
  std::vector<PageKey> keys;
  for (int p = 0; p < pages; ++p) keys.push_back({"vol" + std::to_string(p % 2), p});
  const int n_gts = UniformInt(rng, 1, max_gts);
  for (int i = 0; i < n_gts; ++i) {
    inst.gts[keys[static_cast<std::size_t>(UniformInt(rng, 0, pages - 1))]].push_back(
        RandomBox(rng, 100.0, 0.1, 0.5));
  }
  const int n_dets = UniformInt(rng, 0, max_dets);
  for (int i = 0; i < n_dets; ++i) {
    ScoredBox d;
    d.page = keys[static_cast<std::size_t>(UniformInt(rng, 0, pages - 1))];
    d.score = UniformInt(rng, 1, 10) / 10.0;
    auto it = inst.gts.find(d.page);
    if (it != inst.gts.end() && UniformInt(rng, 0, 2) > 0) {
      // Perturb a ground-truth box so hits and near-misses both occur.
      const BBox& g = it->second[static_cast<std::size_t>(
          UniformInt(rng, 0, static_cast<int>(it->second.size()) - 1))];
      const double j = Uniform(rng, 0, 0.5) * g.width();
      d.box = {g.x_min + j, g.y_min, g.x_max + j, g.y_max};
    } else {
      d.box = RandomBox(rng, 100.0, 0.1, 0.5);
    }
    inst.dets.push_back(d);
  }
  return inst;
}

LossInstance RandomLossInstance(Rng& rng, HeadMode mode, int max_anchors) {
  LossInstance inst;
  const int categories = UniformInt(rng, 1, 4);
  inst.anchors = RandomAnchors(rng, UniformInt(rng, 1, max_anchors));
  inst.gts = RandomGts(rng, UniformInt(rng, 0, 4), categories);
  MatcherConfig mcfg;
  mcfg.num_categories = categories;
  inst.match = mode == HeadMode::kFork
                   ? MatchForked(inst.gts, ForkedAnchorSet{inst.anchors, categories}, mcfg)
                   : MatchStandard(inst.gts, inst.anchors, mcfg);
  inst.pred = RandomPredictions(rng, mode, inst.anchors.size(), categories);
  inst.cfg.weights.clear();
  for (int c = 0; c < categories; ++c) inst.cfg.weights.push_back(Uniform(rng, 0, 1));
  const double ratios[] = {0.0, 1.0, 2.5, 3.0};
  inst.cfg.negative_ratio = ratios[UniformInt(rng, 0, 3)];
  inst.cfg.variances = UniformInt(rng, 0, 1) ? Variances{0.1, 0.2} : Variances{1, 1};
  return inst;
}

AnnotationCorpus RandomCorpus(Rng& rng, int max_volumes, int max_pages,
                              int max_objects) {
  static const char* kNames[] = {"Akane", "Bunta", "Chie", "山田", "Émile"};
  static const char* kTexts[] = {"こんにちは", "Hello!", "…えっ？", "", "ドドド"};
  AnnotationCorpus corpus;
  const int volumes = UniformInt(rng, 0, max_volumes);
  for (int v = 0; v < volumes; ++v) {
    Volume vol;
    vol.title = "Volume" + std::to_string(v);
    if (UniformInt(rng, 0, 1)) vol.genre = "comedy";
    const int pages = UniformInt(rng, 0, max_pages);
    for (int p = 0; p < pages; ++p) {
      Page page;
      page.page_id = p * 2 + UniformInt(rng, 0, 1);
      page.width = UniformInt(rng, 400, 1654);
      page.height = UniformInt(rng, 400, 1170);
      page.irregular = UniformInt(rng, 0, 5) == 0;
      const int objects = UniformInt(rng, 0, max_objects);
      for (int o = 0; o < objects; ++o) {
        AnnotatedObject obj;
        obj.category = static_cast<Category>(UniformInt(rng, 0, 3));
        const double w = Uniform(rng, 1, page.width * 0.5);
        const double h = Uniform(rng, 1, page.height * 0.5);
        const double x = Uniform(rng, 0, page.width - w);
        const double y = Uniform(rng, 0, page.height - h);
        obj.box = {x, y, x + w, y + h};
        if ((obj.category == Category::kFace || obj.category == Category::kBody) &&
            UniformInt(rng, 0, 3) > 0) {
          obj.character_name = kNames[UniformInt(rng, 0, 4)];
        }
        if (obj.category == Category::kText && UniformInt(rng, 0, 3) > 0) {
          obj.text_content = kTexts[UniformInt(rng, 0, 4)];
        }
        page.objects.push_back(std::move(obj));
      }
      vol.pages.push_back(std::move(page));
    }
    corpus.volumes.push_back(std::move(vol));
  }
  return corpus;
}

std::vector<PageDetection> PerfectDetections(const AnnotationCorpus& corpus) {
  std::vector<PageDetection> dets;
  for (const Volume& v : corpus.volumes) {
    for (const Page& p : v.pages) {
      if (p.irregular) continue;
      for (const AnnotatedObject& o : p.objects) {
        dets.push_back({v.title, p.page_id, {o.box, CategoryIndex(o.category), 1.0}});
      }
    }
  }
  return dets;
}

}  // namespace boxforge::testing
