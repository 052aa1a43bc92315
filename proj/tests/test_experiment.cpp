#include "support.hpp"

#include <gtest/gtest.h>

using namespace ksplab;

namespace {

ExperimentManifest single_group(std::vector<int> accelerations)
{
  ExperimentManifest m;
  GroupSpec g;
  g.name = "cine_sax";
  g.phantom.height = 48;
  g.phantom.width = 48;
  g.phantom.coils = 6;
  g.accelerations = std::move(accelerations);
  m.groups.push_back(g);
  m.recon.iterations = 5;
  return m;
}

std::vector<ReportRow> group_rows(std::vector<ReportRow> const& rows)
{
  std::vector<ReportRow> out;
  for (auto const& r : rows) {
    if (r.group != "total") out.push_back(r);
  }
  return out;
}

} // namespace

TEST(Experiment, ThreeAccelerationsGiveThreeRows)
{
  ExperimentResult const res = run_experiment(single_group({4, 8, 10}));
  auto const rows = group_rows(res.rows);
  auto const base = group_rows(res.baseline);
  ASSERT_EQ(rows.size(), 3u);
  ASSERT_EQ(base.size(), 3u);
  EXPECT_EQ(res.rows.size(), 6u);
  EXPECT_EQ(rows[0].acceleration, 4);
  EXPECT_EQ(rows[2].acceleration, 10);
  for (auto const& r : rows) EXPECT_FALSE(r.failed);
  EXPECT_GE(base[0].ssim, base[1].ssim);
  EXPECT_GE(base[1].ssim, base[2].ssim);
}

TEST(Experiment, TotalsRowAggregatesGroupRows)
{
  ExperimentManifest m = single_group({8});
  GroupSpec g2 = m.groups[0];
  g2.name = "T1map";
  g2.phantom_seed = 5;
  m.groups.push_back(g2);
  ExperimentResult const res = run_experiment(m);
  ASSERT_EQ(res.rows.size(), 3u);
  ReportRow const& t = res.rows.back();
  EXPECT_EQ(t.group, "total");
  EXPECT_NEAR(t.total, res.rows[0].total + res.rows[1].total, 1e-9);
  EXPECT_NEAR(t.ssim, 0.5 * (res.rows[0].ssim + res.rows[1].ssim), 1e-9);
}

TEST(Experiment, EmptyAccelerationsRejected)
{
  EXPECT_THROW(run_experiment(single_group({})), ManifestError);
  EXPECT_THROW(single_group({6}).validate(), ManifestError);
  ExperimentManifest dup = single_group({8});
  dup.groups.push_back(dup.groups[0]);
  EXPECT_THROW(dup.validate(), ManifestError);
  EXPECT_THROW(ExperimentManifest{}.validate(), ManifestError);
}

TEST(Experiment, FailingGroupBecomesErrorRow)
{
  ExperimentManifest m = single_group({8});
  m.groups[0].acs_lines = 1;
  ExperimentResult const res = run_experiment(m);
  ASSERT_EQ(res.rows.size(), 2u);
  EXPECT_TRUE(res.rows[0].failed);
  EXPECT_EQ(res.rows[0].slice.rfind("error: ", 0), 0u);
  EXPECT_TRUE(res.rows[1].failed);
}

TEST(Experiment, DeterministicReports)
{
  auto const d1 = ksplab::testing::scratch_dir("exp_a");
  auto const d2 = ksplab::testing::scratch_dir("exp_b");
  ExperimentManifest m = single_group({4, 8});
  m.groups[0].mask_kind = MaskKind::random;
  m.output_dir = d1;
  run_experiment(m);
  m.output_dir = d2;
  run_experiment(m);
  EXPECT_EQ(read_file(d1 / "report.csv"), read_file(d2 / "report.csv"));
  EXPECT_EQ(read_file(d1 / "baseline.csv"), read_file(d2 / "baseline.csv"));
  EXPECT_TRUE(std::filesystem::exists(d1 / "manifest.resolved.json"));
}

TEST(Manifest, DefaultHasElevenGroups)
{
  ExperimentManifest const m = default_manifest();
  ASSERT_EQ(m.groups.size(), 11u);
  EXPECT_NO_THROW(m.validate());
  EXPECT_EQ(m.groups.front().name, "aorta_sag");
  EXPECT_EQ(m.groups.back().name, "tagging");
  EXPECT_EQ(m.weights.reg, 1e-3);
}

TEST(Manifest, JsonRoundTrip)
{
  ExperimentManifest m = default_manifest();
  m.seed = 42;
  m.recon.tune_step = true;
  m.groups[3].accelerations = {4, 10};
  m.groups[3].mask_kind = MaskKind::random;
  ExperimentManifest const back = manifest_from_json(to_json(m));
  EXPECT_EQ(to_json(back).dump(), to_json(m).dump());
  EXPECT_EQ(back.groups[3].accelerations, (std::vector<int>{4, 10}));
}

TEST(Manifest, RejectsUnknownKeysAndBadValues)
{
  nlohmann::json j = to_json(single_group({8}));
  j["colour"] = "blue";
  EXPECT_THROW(manifest_from_json(j), ManifestError);
  j.erase("colour");
  j["groups"][0]["accelerations"] = nlohmann::json::array();
  EXPECT_THROW(manifest_from_json(j), ManifestError);
  j["groups"][0]["accelerations"] = {8};
  j["recon"]["method"] = "admm";
  EXPECT_THROW(manifest_from_json(j), ManifestError);
  j["recon"]["method"] = "gd";
  j["groups"][0]["acs"] = "sixteen";
  EXPECT_THROW(manifest_from_json(j), ManifestError);
}

TEST(Manifest, LoadFromFile)
{
  auto const dir = ksplab::testing::scratch_dir("manifest_load");
  write_file(dir / "m.json", to_json(single_group({4})).dump());
  EXPECT_EQ(load_manifest(dir / "m.json").groups.at(0).accelerations, (std::vector<int>{4}));
  write_file(dir / "bad.json", "{");
  EXPECT_THROW(load_manifest(dir / "bad.json"), ManifestError);
}
