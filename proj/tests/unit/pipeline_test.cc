#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "anchorloc/errors.h"
#include "anchorloc/pipeline.h"
#include "anchorloc/synth.h"
#include "scenarios.h"

namespace anchorloc {
namespace {

namespace fs = std::filesystem;
using testing::PoseDistance;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 20 map frames and 10 queries of the exact scene.
const fs::path& Dataset() {
  static const fs::path dir = [] {
    DatasetSpec spec = testing::ExactDatasetSpec(5);
    std::vector<Pose> map, query;
    for (std::size_t i = 0; i < spec.map.trajectory.size(); i += 3) {
      map.push_back(spec.map.trajectory[i]);
    }
    for (std::size_t i = 0; i < 10; ++i) query.push_back(spec.query.trajectory[i]);
    spec.map.trajectory = map;
    spec.query.trajectory = query;
    const fs::path d = testing::TempDir("pipeline_dataset");
    WriteDataset(d, spec);
    return d;
  }();
  return dir;
}

PipelineConfig Config(const std::string& out) {
  const fs::path root = Dataset();
  return ParseConfig(R"({"dataset": {"root": ")" + root.string() + R"("}, "output_dir": ")" +
                     (fs::temp_directory_path() / ("anchorloc_test_" + out)).string() + "\"}");
}

TEST(PipelineTest, EndToEnd) {
  const PipelineConfig c = Config("pipeline_full");
  const PipelineResult r = RunPipeline(c);
  EXPECT_EQ(r.num_anchored, 10u);
  ASSERT_TRUE(r.metrics);
  EXPECT_EQ(r.metrics->num_frames, 10u);
  for (double a : r.metrics->accuracy) EXPECT_DOUBLE_EQ(a, 100.0);
  EXPECT_LT(r.metrics->median_translation, 1e-6);
  for (const char* name : {"config.json", "localize_log.jsonl", "poses.txt", "provenance.tsv",
                           "metrics.json", "trajectory.csv", "trajectory.svg", "timings.json"}) {
    EXPECT_TRUE(fs::exists(c.output_dir / name)) << name;
  }
  EXPECT_TRUE(fs::exists(c.output_dir / "database" / "manifest.json"));
  const Trajectory written = ReadPoses(c.output_dir / "poses.txt");
  EXPECT_EQ(written.size(), 10u);
  const auto prov = ReadProvenance(c.output_dir / "provenance.tsv");
  EXPECT_EQ(prov, r.provenance);

  // Same config, same seed: byte-identical metrics.
  PipelineConfig again = c;
  again.output_dir = c.output_dir.string() + "_again";
  RunPipeline(again);
  EXPECT_EQ(Slurp(c.output_dir / "metrics.json"), Slurp(again.output_dir / "metrics.json"));
  EXPECT_EQ(Slurp(c.output_dir / "poses.txt"), Slurp(again.output_dir / "poses.txt"));
}

TEST(PipelineTest, LocalizeLogRestoresState) {
  const PipelineConfig c = Config("pipeline_log");
  const PipelineResult r = RunPipeline(c);
  const LocalizeState s = ReadLocalizeLog(c.output_dir / "localize_log.jsonl");
  EXPECT_EQ(s.session.temporal.window, c.temporal.window);
  EXPECT_EQ(s.session.temporal.guided_frames, c.temporal.guided_frames);
  ASSERT_EQ(s.frames.size(), 10u);
  EXPECT_FALSE(s.log.empty());
  for (const auto& f : s.frames) {
    ASSERT_TRUE(f.anchored());
    EXPECT_EQ(f.kp_landmark.size(), f.keypoints.size());
    const Pose& p = r.poses.at(f.frame_id);
    EXPECT_EQ(f.anchor->pose.translation(), p.translation());
  }
  // The restored state refines to the same result.
  const SceneDatabase db = LoadDatabase(s.session.database);
  const RefineResult again = RefineAll(s.frames, db, s.session.intrinsics, c.Refine(),
                                       s.session.ransac);
  for (const auto& [id, pose] : r.poses) {
    EXPECT_LT(PoseDistance(again.poses.at(id), pose), 1e-12);
  }
}

TEST(PipelineTest, Ablations) {
  for (PipelineMode mode : {PipelineMode::kGlobalOnly, PipelineMode::kNoRefine}) {
    PipelineConfig c = Config("pipeline_" + ToString(mode));
    c.mode = mode;
    const PipelineResult r = RunPipeline(c);
    EXPECT_EQ(r.temporal_rounds, mode == PipelineMode::kGlobalOnly ? 0 : 1);
    for (const auto& [id, p] : r.provenance) {
      EXPECT_TRUE(p == Provenance::kAnchorGlobal || p == Provenance::kAnchorTemporal ||
                  p == Provenance::kUnlocalized);
    }
  }
}

TEST(PipelineTest, EnhancedQueriesReplaceOriginals) {
  const fs::path enhanced = testing::TempDir("pipeline_enhanced");
  for (const auto& e : fs::directory_iterator(Dataset() / "query" / "features")) {
    fs::copy_file(e.path(), enhanced / e.path().filename());
  }
  PipelineConfig c = Config("pipeline_enhanced_out");
  c.dataset.enhanced_queries = enhanced;
  const PipelineResult r = RunPipeline(c);
  EXPECT_EQ(r.num_anchored, 10u);
  const LocalizeState s = ReadLocalizeLog(c.output_dir / "localize_log.jsonl");
  EXPECT_EQ(fs::canonical(s.session.queries), fs::canonical(enhanced));
}

TEST(PipelineTest, MissingGroundTruthFailsEvaluation) {
  const fs::path gt = testing::TempDir("pipeline_gt") / "poses.txt";
  Trajectory t = ReadPoses(Dataset() / "gt" / "poses.txt");
  t.erase(t.begin());
  WritePoses(gt, t);
  PipelineConfig c = Config("pipeline_missing_gt");
  c.dataset.ground_truth = gt;
  try {
    RunPipeline(c);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "evaluate");
  }
  EXPECT_TRUE(fs::exists(c.output_dir / "poses.txt"));
}

TEST(PipelineTest, MissingInputIsAStageError) {
  PipelineConfig c = Config("pipeline_missing_input");
  c.dataset.map_poses = c.dataset.map_poses.string() + ".nope";
  try {
    RunPipeline(c);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "map");
  }
}

}  // namespace
}  // namespace anchorloc
