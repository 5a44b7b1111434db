// Copyright 2026 The mhmm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mhmm/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mhmm/simulate.hpp"

namespace mhmm {
namespace {

const MixtureModelSpec kModel = dementia_mixture_model();

void expect_same_record(const SubjectRecord& a, const SubjectRecord& b) {
  EXPECT_EQ(a.id, b.id);
  EXPECT_EQ(a.entry_time, b.entry_time);
  EXPECT_EQ(a.visit_times, b.visit_times);
  EXPECT_EQ(a.visit_states, b.visit_states);
  EXPECT_EQ(a.death_time, b.death_time);
  EXPECT_EQ(a.death_state, b.death_state);
  EXPECT_EQ(a.censor_time, b.censor_time);
  for (int m = 0; m < kModel.n_components(); ++m) EXPECT_EQ(a.end_state_set(m), b.end_state_set(m)) << a.id;
}

// Expects an InputError whose message contains `fragment`.
void expect_input_error(const std::string& csv, const std::string& fragment) {
  try {
    io::read_dataset_csv(csv, kModel, "d.csv");
    ADD_FAILURE() << "no error for:\n" << csv;
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

TEST(FormatDouble, RoundTripsExactly) {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-300, 0.02300000000000002, -7.0, 123456.789}) {
    EXPECT_EQ(io::parse_double(io::format_double(v), "x"), v);
  }
  EXPECT_THROW(io::parse_double("1.5x", "x"), InputError);
  EXPECT_THROW(io::parse_double("", "x"), InputError);
  EXPECT_THROW(io::parse_int("2.0", "x"), InputError);
}

TEST(DatasetCsv, SimulatedRoundTripIsExact) {
  for (const Disclosure mode : {Disclosure::None, Disclosure::Component, Disclosure::EndStateSet}) {
    SimulationDesign design = dementia_simulation_design(4);
    design.disclosure = mode;
    design.entry = EntryRule::uniform(0.0, 2.0);
    const auto data = simulate_dataset(kModel, dementia_simulation_truth(), 200, design);
    const std::string csv = io::write_dataset_csv(data);
    const auto back = io::read_dataset_csv(csv, kModel);
    ASSERT_EQ(back.size(), data.size());
    for (std::size_t i = 0; i < data.size(); ++i) expect_same_record(data[i], back[i]);
    EXPECT_EQ(io::write_dataset_csv(back), csv);
  }
}

TEST(DatasetCsv, EmptyAuxSetAndOptionalEntry) {
  const std::string csv =
      "subject_id,record_type,time,value\n"
      "a,visit,1.5,1\n"
      "a,visit,2,2\n"
      "a,death,2.5,3\n"
      "a,aux,,1:\n"
      "a,aux,,2:2|3|6\n";
  const auto recs = io::read_dataset_csv(csv, kModel);
  ASSERT_EQ(recs.size(), 1U);
  EXPECT_EQ(recs[0].entry_time, 1.5);
  EXPECT_EQ(recs[0].visit_states, (std::vector<int>{0, 1}));
  EXPECT_EQ(recs[0].death_state, 2);
  ASSERT_TRUE(recs[0].end_state_set(0).has_value());
  EXPECT_TRUE(recs[0].end_state_set(0)->empty());
  EXPECT_EQ(*recs[0].end_state_set(1), (std::vector<int>{1, 2, 5}));
  EXPECT_NE(io::write_dataset_csv(recs).find("a,aux,,1:\n"), std::string::npos);
}

TEST(DatasetCsv, ErrorsNameTheLine) {
  const std::string h = "subject_id,record_type,time,value\n";
  expect_input_error("id,type,time,value\n", "line 1");
  expect_input_error("", "missing header");
  expect_input_error(h + "a,visit,0,1\na,visit,abc,1\n", "line 3");
  expect_input_error(h + "a,visit,0,1\na,visit,1,9\n", "line 3: state 9");
  expect_input_error(h + "a,visit,0,1\na,visit,1\n", "line 3: expected 4 fields");
  expect_input_error(h + "a,visit,0,1\nb,visit,0,1\na,visit,2,1\n", "line 4: rows of subject 'a' are not contiguous");
  expect_input_error(h + "a,visit,1,1\na,visit,0.5,1\n", "line 3: times must be nondecreasing");
  expect_input_error(h + "a,visit,0,1\na,teleport,1,1\n", "unknown record_type");
  expect_input_error(h + "a,visit,0,1\na,death,1,3\na,visit,2,1\n", "line 4: visit after death");
  expect_input_error(h + "a,visit,0,1\na,aux,,3:1\n", "line 3: aux component out of range");
  expect_input_error(h + "a,visit,0,3\n", "subject 'a'");  // dead state at a visit fails record validation
  expect_input_error(h + "a,entry,0,\n", "subject 'a'");
}

TEST(ModelJson, RoundTrip) {
  const io::json j = io::model_to_json(kModel);
  EXPECT_EQ(j["format"], "mhmm-model");
  EXPECT_EQ(io::model_from_json(j), kModel);
  io::json bad = j;
  bad["version"] = 2;
  EXPECT_THROW(io::model_from_json(bad), InputError);
  bad = j;
  bad["components"][0]["transitions"].push_back({4, 1});  // absorbing state with an exit
  EXPECT_THROW(io::model_from_json(bad), ModelError);
}

TEST(ParamsJson, RoundTripAndErrors) {
  const ParameterSet p = dementia_cohort_estimates();
  const io::json j = io::params_to_json(kModel, p);
  const ParameterSet back = io::params_from_json(kModel, io::parse_json(j.dump(2), "p"));
  for (const ParamRef& ref : model_parameters(kModel)) EXPECT_EQ(back.value(kModel, ref), p.value(kModel, ref));

  io::json missing = j;
  missing["parameters"].erase("lambda2.3-6");
  EXPECT_THROW(io::params_from_json(kModel, missing), InputError);
  io::json unknown = j;
  unknown["parameters"]["lambda1.4-1"] = 1.0;
  EXPECT_THROW(io::params_from_json(kModel, unknown), InputError);
  io::json wrong = j;
  wrong["format"] = "mhmm-fit";
  EXPECT_THROW(io::params_from_json(kModel, wrong), InputError);
  EXPECT_THROW(io::parse_json("{", "broken.json"), InputError);
}

TEST(ParamsJson, ShippedDataFilesMatchBuiltIns) {
  const std::string dir = MHMM_DATA_DIR;
  EXPECT_EQ(io::model_from_json(io::read_json_file(dir + "/dementia_model.json")), kModel);
  const ParameterSet truth = io::params_from_json(kModel, io::read_json_file(dir + "/simulation_truth.json"));
  const ParameterSet cohort = io::params_from_json(kModel, io::read_json_file(dir + "/cohort_estimates.json"));
  for (const ParamRef& ref : model_parameters(kModel)) {
    EXPECT_EQ(truth.value(kModel, ref), dementia_simulation_truth().value(kModel, ref)) << ref.name();
    EXPECT_EQ(cohort.value(kModel, ref), dementia_cohort_estimates().value(kModel, ref)) << ref.name();
  }
}

TEST(FitJson, CarriesModelAndPointEstimate) {
  const ParameterSet truth = dementia_simulation_truth();
  const auto data = simulate_dataset(kModel, truth, 150, dementia_simulation_design(3));
  const ParameterLayout layout(kModel, ConstraintSet{}.tie(ParamRef::pi(1, 1), ParamRef::pi(1, 0), 0.75));
  MleOptions opt;
  opt.starts = 1;
  const FitResult fit = fit_mle(layout, data, opt);
  const io::json j = io::parse_json(io::fit_to_json(layout, fit).dump(), "fit");
  EXPECT_EQ(j["format"], "mhmm-fit");
  EXPECT_EQ(j["constraints"].size(), 1U);
  EXPECT_EQ(io::constraints_from_json(j["constraints"], "c").items.size(), 1U);
  const io::PointEstimate pe = io::point_estimate_from_json(j, std::nullopt, "fit");
  EXPECT_TRUE(pe.model_embedded);
  EXPECT_EQ(pe.model, kModel);
  for (const ParamRef& ref : model_parameters(kModel)) {
    EXPECT_EQ(pe.params.value(kModel, ref), fit.params_hat.value(kModel, ref)) << ref.name();
  }
  EXPECT_THROW(io::point_estimate_from_json(io::params_to_json(kModel, truth), std::nullopt, "p"), InputError);
  EXPECT_NO_THROW(io::point_estimate_from_json(io::params_to_json(kModel, truth), kModel, "p"));
}

TEST(Files, AtomicWriteLeavesNoTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "mhmm_io_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "out.txt").string();
  io::write_text_file(path, "hello\n");
  EXPECT_EQ(io::read_text_file(path), "hello\n");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_THROW(io::read_text_file((dir / "absent.txt").string()), InputError);
  EXPECT_THROW(io::check_writable((dir / "no_such_dir" / "x").string()), InputError);
  std::filesystem::remove_all(dir);
}

TEST(PrevalenceCsv, HeaderAndRowCount) {
  const PrevalenceCurve c = prevalence_curve(kModel, dementia_cohort_estimates(), {75, 76, 77}, 75.0, 1);
  const std::string csv = io::prevalence_csv(c, {{0, 0.1, 0.2}, {0, 0.05, 0.1}});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "age,all_cause,type_1,type_2,cum_incidence_1,cum_incidence_2");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

}  // namespace
}  // namespace mhmm
