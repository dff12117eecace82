#include <doctest.h>

#include <random>
#include <sstream>
#include <thread>

#include "../support/fixtures.hpp"
#include "predis/computing_server.hpp"
#include "predis/detection_server.hpp"

using namespace predis;
using namespace std::chrono_literals;

namespace {

MaskedTuple masked_of(const FixedFeatures& test, const MaskVector& m) {
  FeatureTuple t;
  t.serial_number = m.serial_number;
  t.time = m.time;
  t.features = test;
  return apply_mask(t, m);
}

ServerErrc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ServerError& e) {
    return e.code();
  }
  FAIL("expected a ServerError");
  return ServerErrc::kNotLoaded;
}

}  // namespace

TEST_CASE("1200 normal plus 1200 attack instances build a 2400-node tree") {
  std::mt19937_64 rng(101);
  ComputingServer cs;
  CHECK_FALSE(cs.loaded());
  CHECK(cs.generation() == 0);
  auto train = fixtures::random_training(rng, 2400);
  for (std::size_t i = 0; i < train.size(); ++i) train[i].label = i < 1200 ? ClassLabel::kNormal : ClassLabel::kAttack;
  cs.load_training(train);
  CHECK(cs.loaded());
  CHECK(cs.generation() == 1);
  const auto topo = cs.topology();
  CHECK(topo.size() == 2400);
  std::size_t attack_nodes = 0;
  for (const auto& node : topo.nodes()) attack_nodes += node.label == ClassLabel::kAttack;
  CHECK(attack_nodes == 1200);

  cs.load_training(fixtures::random_training(rng, 10));
  CHECK(cs.generation() == 2);
  CHECK(cs.topology().size() == 10);

  auto dup = fixtures::random_training(rng, 5);
  dup[3].instance_id = dup[1].instance_id;
  CHECK_THROWS_AS(cs.load_training(dup), KnnError);
  CHECK(cs.topology().size() == 10);  // a failed reload keeps the old tree
}

TEST_CASE("preliminary_compute before loading is NotLoaded") {
  ComputingServer cs;
  CHECK(code_of([&] { cs.preliminary_compute(MaskedTuple{}); }) == ServerErrc::kNotLoaded);
  CHECK(code_of([&] { cs.topology(); }) == ServerErrc::kNotLoaded);
}

TEST_CASE("preliminary_compute examples") {
  ComputingServer cs;
  std::vector<TrainingInstance> one{{7, {100, 0, 0, 0, 0}, ClassLabel::kAttack}};
  cs.load_training(one);
  SUBCASE("plain difference") {
    const auto r = cs.preliminary_compute(MaskedTuple{1, 2, {95, 0, 0, 0, 0}});
    REQUIRE(r.per_instance_diffs.size() == 1);
    CHECK(r.per_instance_diffs[0][0] == 5);
    CHECK(r.key() == WindowKey{1, 2});
  }
  SUBCASE("wraps modulo 2^33") {
    const auto r = cs.preliminary_compute(MaskedTuple{1, 2, {130, 1, 0, 0, 0}});
    CHECK(r.per_instance_diffs[0][0] == (std::uint64_t{1} << 33) - 30);
    CHECK(r.per_instance_diffs[0][1] == kAttributeMask);
  }
}

TEST_CASE("unmasked output equals the plaintext differences") {
  std::mt19937_64 rng(103);
  ComputingServer cs;
  const auto train = fixtures::random_training(rng, 300);
  cs.load_training(train);
  const auto tree = build_kdtree(train);
  MaskGenerator masks(5);
  for (int i = 0; i < 100; ++i) {
    const auto test = fixtures::random_point(rng);
    const auto m = gen_masks(masks, 1, static_cast<std::uint64_t>(i));
    const auto prelim = cs.preliminary_compute(masked_of(test, m));
    CHECK(prelim.per_instance_diffs.size() == 300);
    REQUIRE(unmask_differences(prelim, m) == plaintext_diffs(tree, test));
  }
  CHECK(cs.compute_time().count() > 0);
}

TEST_CASE("training CSV round trip") {
  std::mt19937_64 rng(107);
  const FixedPointCodec codec;
  const auto train = fixtures::random_training(rng, 200);
  std::stringstream buf;
  write_training_csv(buf, train, codec);
  CHECK(load_training_csv(buf, codec) == train);

  std::istringstream bad_header("id,a,b\n");
  CHECK(code_of([&] { load_training_csv(bad_header, codec); }) == ServerErrc::kBadTrainingFile);
  std::istringstream bad_label("instance_id,mpf,mbf,pcf,gop,gsi,label\n1,1,1,1,1,1,MAYBE\n");
  CHECK(code_of([&] { load_training_csv(bad_label, codec); }) == ServerErrc::kBadTrainingFile);
  CHECK(code_of([&] { load_training_csv(std::filesystem::path("/nonexistent.csv"), codec); }) ==
        ServerErrc::kBadTrainingFile);
}

TEST_CASE("serve sends topology first, then one prelim and one Ack per tuple") {
  std::mt19937_64 rng(109);
  ComputingServer cs;
  cs.load_training(fixtures::random_training(rng, 50));
  LocalHub agents, ds;
  auto ds_side = ds.connect();
  std::thread worker([&] { cs.serve(agents, *ds_side); });

  auto agent = agents.connect();
  for (std::uint64_t t = 0; t < 20; ++t) agent->send(TupleMsg{MaskedTuple{1, t, fixtures::random_point(rng)}});
  for (int i = 0; i < 20; ++i) CHECK(agent->receive(5s) == Message{AckMsg{}});

  auto first = ds.receive(5s);
  REQUIRE(first);
  CHECK(std::get<TopologyMsg>(first->message).topology == cs.topology());
  for (std::uint64_t t = 0; t < 20; ++t) {
    auto env = ds.receive(5s);
    REQUIRE(env);
    const auto& prelim = std::get<PrelimMsg>(env->message).result;
    CHECK(prelim.key() == WindowKey{1, t});
    CHECK(prelim.per_instance_diffs.size() == 50);
  }
  CHECK(cs.tuples_processed() == 20);

  // A reload pushes the new topology before the next prelim.
  cs.load_training(fixtures::random_training(rng, 8));
  agent->send(TupleMsg{MaskedTuple{1, 99, {}}});
  CHECK(agent->receive(5s));
  auto topo = ds.receive(5s);
  REQUIRE(topo);
  CHECK(std::get<TopologyMsg>(topo->message).topology.size() == 8);
  auto prelim = ds.receive(5s);
  REQUIRE(prelim);
  CHECK(std::get<PrelimMsg>(prelim->message).result.per_instance_diffs.size() == 8);

  agents.close();
  worker.join();
  ds.close();
}
