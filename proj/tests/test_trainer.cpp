#include <gtest/gtest.h>

#include <sstream>

#include "carevec/checkpoint.hpp"
#include "carevec/synthgen.hpp"
#include "carevec/trainer.hpp"
#include "test_support.hpp"

using namespace carevec;

namespace {

struct SmallData {
  Vocabulary vocab;
  std::vector<PatientEncoding> train, valid;
};

const SmallData& small_data() {
  static const SmallData data = [] {
    GenConfig g;
    g.n_members = 120;
    g.n_groups = 4;
    g.codes_per_group = 8;
    g.chronic_codes_per_group = 2;
    g.n_noise_codes = 6;
    g.visits_per_member_mean = 6;
    g.codes_per_visit_mean = 3;
    const DateRange window{Date::from_ymd(2014, 1, 1), Date::from_ymd(2015, 12, 31)};
    auto cohort = prepare_cohort(generate(g).claims, {}, window, 2);
    auto split = split_dataset(cohort, SplitRatios{}, 3);
    SmallData d;
    d.vocab = build_vocabulary(split.train);
    d.train = encode_cohort(split.train, d.vocab);
    d.valid = encode_cohort(split.valid, d.vocab, UnknownCodes::skip);
    return d;
  }();
  return data;
}

TrainConfig small_config(Mode mode) {
  TrainConfig c;
  c.mode = mode;
  c.code_dim = 8;
  c.visit_dim = 6;
  c.patient_dim = 6;
  c.minibatch = 16;
  c.epochs = 6;
  c.k_negatives = 3;
  c.learning_rate = 0.01;
  return c;
}

std::string checkpoint_bytes(const Checkpoint& ck) {
  std::ostringstream os;
  save_checkpoint(os, ck);
  return os.str();
}

}  // namespace

TEST(Train, LossDecreasesWithoutEarlyStopping) {
  const auto& d = small_data();
  for (Mode mode : {Mode::pv, Mode::pv_plus, Mode::no_patient_vector, Mode::skipgram}) {
    auto cfg = small_config(mode);
    cfg.patience = 0;
    cfg.epochs = 10;
    auto r = train(d.train, d.valid, d.vocab, cfg);
    ASSERT_EQ(r.log.epochs.size(), 10u) << to_string(mode);
    EXPECT_LT(r.log.epochs.back().train_loss, r.log.epochs.front().train_loss) << to_string(mode);
  }
}

TEST(Train, SgdAlsoDescends) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv);
  cfg.optimizer = Optimizer::sgd;
  cfg.learning_rate = 0.5;
  cfg.patience = 0;
  auto r = train(d.train, d.valid, d.vocab, cfg);
  EXPECT_LT(r.log.epochs.back().train_loss, r.log.epochs.front().train_loss);
}

TEST(Train, DeterministicLogAndCheckpointBytes) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv_plus);
  auto a = train(d.train, d.valid, d.vocab, cfg);
  cfg.threads = 3;
  auto b = train(d.train, d.valid, d.vocab, cfg);
  std::ostringstream la, lb;
  a.log.write_csv(la);
  b.log.write_csv(lb);
  EXPECT_EQ(la.str(), lb.str());
  EXPECT_EQ(checkpoint_bytes({a.params, d.vocab, 3, to_json(cfg)}), checkpoint_bytes({b.params, d.vocab, 3, to_json(cfg)}));
}

TEST(Train, ReturnsBestValidationEpoch) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv);
  cfg.patience = 0;
  auto r = train(d.train, d.valid, d.vocab, cfg);
  double best = 1e300;
  int best_epoch = 0;
  for (const auto& e : r.log.epochs) {
    if (e.valid_loss < best) {
      best = e.valid_loss;
      best_epoch = e.epoch;
    }
  }
  EXPECT_EQ(r.log.best_epoch, best_epoch);
  EXPECT_LE(r.log.best_epoch, static_cast<int>(r.log.epochs.size()));
  // The returned parameters reproduce the recorded validation loss.
  const double again = dataset_loss(r.params, d.valid, cfg.objective(), 16, derive_seed_str(cfg.seed, "valid"), 1);
  EXPECT_EQ(again, best);
}

TEST(Train, EarlyStoppingHonoursPatience) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv);
  cfg.learning_rate = 0.3;  // overshoots quickly, so validation stops improving
  cfg.epochs = 30;
  cfg.patience = 2;
  auto r = train(d.train, d.valid, d.vocab, cfg);
  const int ran = static_cast<int>(r.log.epochs.size());
  if (ran < cfg.epochs) {
    EXPECT_EQ(ran, r.log.best_epoch + cfg.patience);
  }
}

TEST(Train, SinglesNeverCrashTheLoop) {
  auto d = small_data();
  for (auto& p : d.train) {
    if (p.visits.size() > 1) p.visits.resize(1);
  }
  auto r = train(d.train, {}, d.vocab, small_config(Mode::pv_plus));
  EXPECT_FALSE(r.log.epochs.empty());
  for (const auto& e : r.log.epochs) EXPECT_TRUE(std::isfinite(e.train_loss));
}

TEST(Train, NonFiniteLossAbortsNamingTheBatch) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv);
  cfg.init_scale = 1e300;
  try {
    train(d.train, d.valid, d.vocab, cfg);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("batch 0"), std::string::npos) << e.what();
  }
}

TEST(Train, ConfigValidation) {
  const auto& d = small_data();
  auto cfg = small_config(Mode::pv);
  cfg.minibatch = 0;
  EXPECT_THROW(train(d.train, d.valid, d.vocab, cfg), std::invalid_argument);
  cfg = small_config(Mode::pv);
  cfg.lambda = -1;
  EXPECT_THROW(train(d.train, d.valid, d.vocab, cfg), std::invalid_argument);
  EXPECT_THROW(train({}, d.valid, d.vocab, small_config(Mode::pv)), DataError);
}

TEST(Train, DefaultHyperparameterGridAccepted) {
  for (double lambda : {0.5, 1.0}) {
    for (int k : {10, 20}) {
      for (std::size_t dim : {100u, 200u}) {
        TrainConfig c;
        c.lambda = lambda;
        c.k_negatives = k;
        c.code_dim = c.visit_dim = c.patient_dim = dim;
        EXPECT_NO_THROW(c.validate());
        EXPECT_EQ(c.minibatch, 100);
        EXPECT_EQ(c.window, 1);
        EXPECT_EQ(c.epochs, 40);
      }
    }
  }
}

TEST(GridSelect, PoisonedLambdaLoses) {
  const auto& d = small_data();
  std::vector<TrainConfig> configs{small_config(Mode::pv), small_config(Mode::pv)};
  configs[0].lambda = 1e6;
  configs[0].epochs = configs[1].epochs = 2;
  auto g = grid_select(configs, d.train, d.valid, d.vocab);
  EXPECT_EQ(g.best_index, 1u);
  ASSERT_EQ(g.valid_losses.size(), 2u);
  EXPECT_GT(g.valid_losses[0], g.valid_losses[1]);
}

TEST(GridSelect, SingleConfigAndTieGoesToFirst) {
  const auto& d = small_data();
  std::vector<TrainConfig> one{small_config(Mode::pv)};
  one[0].epochs = 2;
  EXPECT_EQ(grid_select(one, d.train, d.valid, d.vocab).best_index, 0u);
  std::vector<TrainConfig> twins{one[0], one[0]};
  auto g = grid_select(twins, d.train, d.valid, d.vocab);
  EXPECT_EQ(g.valid_losses[0], g.valid_losses[1]);
  EXPECT_EQ(g.best_index, 0u);
  EXPECT_THROW(grid_select({}, d.train, d.valid, d.vocab), std::invalid_argument);
}

TEST(Checkpoint, RoundTripBitExact) {
  const auto& d = small_data();
  for (Mode mode : {Mode::pv, Mode::pv_plus, Mode::no_patient_vector, Mode::skipgram}) {
    auto P = make_zero_params(mode, model_dims(small_config(mode), d.vocab));
    carevec::testing::randomize(P, 5, 3.0);
    P.W_c(0, 0) = -0.0;
    P.W_c(1, 0) = 1e-310;  // subnormal
    Checkpoint ck{P, d.vocab, 42, {{"note", "x"}}};
    const auto bytes = checkpoint_bytes(ck);
    std::istringstream is(bytes);
    auto back = load_checkpoint(is);
    EXPECT_EQ(back.params.mode, mode);
    EXPECT_EQ(back.split_seed, 42u);
    EXPECT_EQ(back.vocab.hash(), d.vocab.hash());
    std::vector<ModelParams::TensorRef> a, b;
    P.for_each_tensor([&](ModelParams::TensorRef t) { a.push_back(t); });
    back.params.for_each_tensor([&](ModelParams::TensorRef t) { b.push_back(t); });
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      ASSERT_EQ(a[k].size(), b[k].size());
      EXPECT_EQ(std::memcmp(a[k].data, b[k].data, static_cast<std::size_t>(a[k].size()) * 8), 0) << a[k].name;
    }
    EXPECT_EQ(checkpoint_bytes(back), bytes);
  }
}

TEST(Checkpoint, FileRoundTrip) {
  carevec::testing::TempDir dir;
  const auto& d = small_data();
  auto P = make_zero_params(Mode::pv_plus, model_dims(small_config(Mode::pv_plus), d.vocab));
  carevec::testing::randomize(P, 6, 1.0);
  save_checkpoint(dir.file("m.ckpt"), {P, d.vocab, 1, {}});
  EXPECT_EQ(load_checkpoint(dir.file("m.ckpt")).params.W_x, P.W_x);
  EXPECT_THROW(load_checkpoint(dir.file("missing.ckpt")), CheckpointError);
}

TEST(Checkpoint, DistinctErrors) {
  const auto& d = small_data();
  auto P = make_zero_params(Mode::pv, model_dims(small_config(Mode::pv), d.vocab));
  const auto bytes = checkpoint_bytes({P, d.vocab, 1, {}});
  const auto nl = bytes.find('\n');
  auto header = nlohmann::json::parse(bytes.substr(0, nl));
  const auto blob = bytes.substr(nl + 1);

  auto load = [](const std::string& s) {
    std::istringstream is(s);
    return load_checkpoint(is);
  };
  // Corrupt header bytes.
  EXPECT_THROW(load("garbage" + bytes), CheckpointVersionError);
  auto v2 = header;
  v2["version"] = 2;
  EXPECT_THROW(load(v2.dump() + "\n" + blob), CheckpointVersionError);
  // Shape disagreeing with the declared dims.
  auto shaped = header;
  shaped["tensors"][0]["rows"] = 3;
  EXPECT_THROW(load(shaped.dump() + "\n" + blob), CheckpointShapeError);
  auto hashed = header;
  hashed["vocab_hash"] = "0000000000000000";
  EXPECT_THROW(load(hashed.dump() + "\n" + blob), CheckpointShapeError);
  // Truncated tensor blob.
  EXPECT_THROW(load(bytes.substr(0, bytes.size() - 9)), CheckpointTruncatedError);
  EXPECT_THROW(load(""), CheckpointTruncatedError);
}
