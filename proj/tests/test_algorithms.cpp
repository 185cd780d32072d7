#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "fedclip/algorithms.hpp"
#include "fedclip/objectives.hpp"

using namespace fedclip;

namespace {

HyperParams make_hp(double eta, double gamma, std::size_t interval, long long rounds,
                    std::size_t n_clients) {
    HyperParams hp;
    hp.eta = eta;
    hp.gamma = gamma;
    hp.interval = interval;
    hp.rounds = rounds;
    hp.n_clients = n_clients;
    return hp;
}

RoundContext counterexample_ctx(std::size_t interval = 1) {
    return RoundContext{make_quadratic_counterexample(2.0), NoiseModel{},
                        make_hp(1.0, 2.0, interval, 1, 2), 0, 1};
}

// steep scalar objective used to force divergence under a huge step size
class CubicGrowth final : public Objective {
public:
    std::size_t dim() const override { return 1; }
    double value(const ParameterVector& x) const override { return x[0] * x[0] * x[0] * x[0]; }
    ParameterVector gradient(const ParameterVector& x) const override {
        return ParameterVector{4.0 * x[0] * x[0] * x[0]};
    }
};

} // namespace

TEST_CASE("corrected_gradient: N=1 correction cancels bitwise") {
    const ParameterVector local{0.1 + 0.2, -7.25, 1e-17};
    const ParameterVector G{1.000000000000001, 3.3, 2.0};
    CHECK(corrected_gradient(local, G, G) == local);
}

TEST_CASE("corrected_gradient: substitution on the counterexample") {
    // g = (x + a_i) - a_i + 1/2 = x + 1/2 for both clients
    const auto clients = make_quadratic_counterexample(2.0);
    const ParameterVector xbar{0.0};
    const ParameterVector G = mean_gradient(clients, xbar);
    for (int i = 0; i < 2; ++i) {
        const ParameterVector local = clients[static_cast<std::size_t>(i)]->gradient(ParameterVector{0.7});
        const ParameterVector Gi = clients[static_cast<std::size_t>(i)]->gradient(xbar);
        const ParameterVector g = corrected_gradient(local, Gi, G);
        CHECK(g[0] == Catch::Approx(0.7 + 0.5).epsilon(1e-15));
    }
}

TEST_CASE("corrected_gradient: dimension mismatch") {
    CHECK_THROWS_AS(corrected_gradient(ParameterVector{1.0}, ParameterVector{1.0, 2.0},
                                       ParameterVector{1.0, 2.0}),
                    DimensionError);
}

TEST_CASE("resample_controls: noiseless controls equal the exact gradients") {
    RoundContext ctx = counterexample_ctx();
    const RoundState rs = resample_controls(ctx, 0, ParameterVector{0.0});
    CHECK(rs.controls[0][0] == -3.0);
    CHECK(rs.controls[1][0] == 4.0);
    CHECK(rs.mean_control[0] == 0.5);
    CHECK_FALSE(rs.clip_round); // 0.5 <= 2
}

TEST_CASE("resample_controls: single client mean equals its control") {
    RoundContext ctx{{std::make_shared<QuarticClient>(1.0, 1)},
                     NoiseModel{1.0, NoiseKind::kUniformBall},
                     make_hp(0.1, 1.0, 1, 1, 1),
                     5,
                     1};
    const RoundState rs = resample_controls(ctx, 3, ParameterVector{0.5});
    CHECK(rs.mean_control == rs.controls[0]);
}

TEST_CASE("resample_controls uses the control purpose, independent of local draws") {
    RoundContext ctx{{std::make_shared<QuarticClient>(1.0, 1)},
                     NoiseModel{1.0, NoiseKind::kUniformBall},
                     make_hp(0.1, 1.0, 1, 1, 1),
                     5,
                     1};
    const ParameterVector x{0.5};
    const RoundState rs = resample_controls(ctx, 3, x);
    RngStream local_rng(5, 0, 3, 0, DrawPurpose::kLocal);
    const ParameterVector local = sample_stochastic_gradient(*ctx.objectives[0], x, ctx.noise, local_rng);
    CHECK(rs.controls[0] != local);
}

TEST_CASE("episode_round solves the counterexample in one round exactly") {
    RoundContext ctx = counterexample_ctx();
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    const ParameterVector next = episode_round(ctx, 0, clients, ParameterVector{0.0}, outcome);
    CHECK(next[0] == -0.5);
    CHECK_FALSE(outcome.clipped);
    CHECK(clients[0].iterate[0] == -0.5);
    CHECK(clients[1].iterate[0] == -0.5);
}

TEST_CASE("episode_round: I=4 stays at the fixed point") {
    RoundContext ctx = counterexample_ctx(4);
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    ParameterVector x = episode_round(ctx, 0, clients, ParameterVector{0.0}, outcome);
    CHECK(x[0] == -0.5);
    RoundOutcome outcome2;
    x = episode_round(ctx, 1, clients, x, outcome2);
    CHECK(x[0] == -0.5);
}

TEST_CASE("episode_round: clipped rounds move every client exactly gamma per step") {
    // huge global gradient at xbar = -4 forces the clip branch
    RoundContext ctx{make_quartic_clients(2.0, 2), NoiseModel{}, make_hp(0.05, 0.25, 3, 1, 2), 0, 1};
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    RoundTrace trace;
    const ParameterVector xbar{-4.0};
    REQUIRE(mean_gradient(ctx.objectives, xbar).norm() > ctx.hp.clip_threshold());
    episode_round(ctx, 0, clients, xbar, outcome, &trace);
    CHECK(outcome.clipped);
    for (const auto& path : trace.iterates) {
        ParameterVector prev = xbar;
        for (const auto& pt : path) {
            CHECK(distance(pt, prev) == Catch::Approx(0.25).epsilon(1e-12));
            prev = pt;
        }
    }
}

TEST_CASE("celgc_round: counterexample clients land at +/- gamma and stall") {
    RoundContext ctx = counterexample_ctx();
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    const ParameterVector next = celgc_round(ctx, 0, clients, ParameterVector{0.0}, outcome);
    CHECK(clients[0].iterate[0] == 2.0);
    CHECK(clients[1].iterate[0] == -2.0);
    CHECK(next[0] == 0.0);
    CHECK(outcome.clipped);
}

TEST_CASE("fedavg_round: counterexample steps average to the global gradient step") {
    RoundContext ctx = counterexample_ctx();
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    const ParameterVector next = fedavg_round(ctx, 0, clients, ParameterVector{0.0}, outcome);
    CHECK(clients[0].iterate[0] == 3.0);
    CHECK(clients[1].iterate[0] == -4.0);
    CHECK(next[0] == -0.5);
    CHECK_FALSE(outcome.clipped);
}

TEST_CASE("fedavg matches a hand-rolled local SGD loop and blows up on the quartic") {
    // H=8 with eta=0.1 and no clipping: the +/-2Hx terms grow until the run
    // leaves the finite range in round 2
    const double H = 8.0, eta = 0.1;
    const std::size_t I = 4;
    RoundContext ctx{make_quartic_clients(H, 2), NoiseModel{}, make_hp(eta, 1.0, I, 10, 2), 0, 1};
    std::vector<ClientState> clients(2);
    ParameterVector xbar{0.0};
    double hand_xbar = 0.0;
    for (long long r = 0; r < 2; ++r) {
        RoundOutcome outcome;
        xbar = fedavg_round(ctx, r, clients, xbar, outcome);
        // independent oracle: plain per-client descent, then average
        double avg = 0.0;
        for (int client : {1, 2}) {
            double x = hand_xbar;
            for (std::size_t t = 0; t < I; ++t) x -= eta * quartic_eval(H, client, x).gradient;
            avg += 0.5 * x;
        }
        hand_xbar = avg;
        REQUIRE(outcome.finite);
        REQUIRE(xbar[0] == hand_xbar);
    }
    const auto run = run_training(Algorithm::kFedAvg, ctx.objectives, NoiseModel{}, ctx.hp,
                                  ParameterVector{0.0}, 0);
    CHECK(run.trajectory.status == RunStatus::kDiverged);
    CHECK(run.trajectory.diverged_round == 2);
    CHECK(run.trajectory.rows.back().loss > 1e9); // loss increased sharply before the stop
}

TEST_CASE("scaffold_round: round 0 equals fedavg_round with the same seed") {
    RoundContext ctx{make_quartic_clients(4.0, 2),
                     NoiseModel{0.5, NoiseKind::kUniformBall},
                     make_hp(0.01, 0.5, 5, 1, 2),
                     11,
                     1};
    std::vector<ClientState> scaffold_clients(2), fedavg_clients(2);
    ParameterVector server_control;
    RoundOutcome a, b;
    const ParameterVector xbar{1.0};
    const ParameterVector sc =
        scaffold_round(ctx, 0, scaffold_clients, xbar, server_control, false, a);
    const ParameterVector fa = fedavg_round(ctx, 0, fedavg_clients, xbar, b);
    CHECK(sc == fa);
}

TEST_CASE("scaffold_round: option-II control update on the counterexample") {
    RoundContext ctx = counterexample_ctx();
    std::vector<ClientState> clients(2);
    ParameterVector server_control;
    RoundOutcome outcome;
    const ParameterVector x0{0.0};
    const ParameterVector x1 =
        scaffold_round(ctx, 0, clients, x0, server_control, false, outcome);
    CHECK(x1[0] == -0.5);
    // c_i^new = (xbar_0 - y_i) / (I eta) = grad f_i(xbar_0)
    CHECK(clients[0].control[0] == -3.0);
    CHECK(clients[1].control[0] == 4.0);
    CHECK(server_control[0] == 0.5);
    // round 1 behaves like corrected descent: both clients step toward x*
    RoundOutcome outcome2;
    const ParameterVector x2 =
        scaffold_round(ctx, 1, clients, x1, server_control, false, outcome2);
    CHECK(x2[0] == -0.5); // grad f(x*) = 0 and corrections cancel the heterogeneity
}

TEST_CASE("scaffold clipped variant with an inactive threshold matches unclipped") {
    RoundContext ctx{make_quartic_clients(2.0, 2),
                     NoiseModel{0.3, NoiseKind::kUniformPerCoordinate},
                     make_hp(0.01, 1e6, 4, 1, 2), // threshold 1e8: never reached
                     3,
                     1};
    std::vector<ClientState> a(2), b(2);
    ParameterVector ca, cb;
    RoundOutcome oa, ob;
    ParameterVector xa{0.5}, xb{0.5};
    for (long long r = 0; r < 3; ++r) {
        xa = scaffold_round(ctx, r, a, xa, ca, true, oa);
        xb = scaffold_round(ctx, r, b, xb, cb, false, ob);
        REQUIRE(xa == xb);
    }
    CHECK_FALSE(oa.clipped);
}

TEST_CASE("naive_parallel_round: counterexample takes the global step, no clip") {
    RoundContext ctx = counterexample_ctx();
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    const ParameterVector next =
        naive_parallel_round(ctx, 0, clients, ParameterVector{0.0}, outcome);
    CHECK(next[0] == -0.5); // mean gradient 1/2, threshold 2 not hit
    CHECK_FALSE(outcome.clipped);
}

TEST_CASE("naive_parallel_round: sigma=0 with inactive clipping is GD on f") {
    RoundContext ctx{make_quartic_clients(1.0, 2), NoiseModel{}, make_hp(0.01, 100.0, 5, 1, 2), 0, 1};
    std::vector<ClientState> clients(2);
    RoundOutcome outcome;
    ParameterVector x =
        naive_parallel_round(ctx, 0, clients, ParameterVector{1.0}, outcome);
    double hand = 1.0;
    for (int t = 0; t < 5; ++t)
        hand -= 0.01 * 0.5 * (quartic_eval(1.0, 1, hand).gradient + quartic_eval(1.0, 2, hand).gradient);
    CHECK(x[0] == Catch::Approx(hand).epsilon(1e-15));
}

TEST_CASE("run_training: R=0 trajectory holds only the initial point") {
    const auto result = run_training(Algorithm::kEpisode, make_quadratic_counterexample(2.0),
                                     NoiseModel{}, make_hp(1.0, 2.0, 1, 0, 2),
                                     ParameterVector{0.0}, 0);
    REQUIRE(result.trajectory.rows.size() == 1);
    CHECK(result.trajectory.rows[0].round == 0);
    CHECK(result.trajectory.rows[0].loss == 0.0);
    CHECK(result.trajectory.rows[0].grad_norm == 0.5);
}

TEST_CASE("run_training: identical seed and config replay bitwise") {
    const auto objectives = make_quartic_clients(4.0, 4);
    const NoiseModel noise{1.0, NoiseKind::kUniformPerCoordinate};
    const HyperParams hp = make_hp(0.01, 0.1, 8, 25, 4);
    const auto a = run_training(Algorithm::kEpisode, objectives, noise, hp, ParameterVector{1.0}, 19);
    const auto b = run_training(Algorithm::kEpisode, objectives, noise, hp, ParameterVector{1.0}, 19);
    REQUIRE(a.trajectory.rows.size() == b.trajectory.rows.size());
    for (std::size_t i = 0; i < a.trajectory.rows.size(); ++i) {
        CHECK(a.trajectory.rows[i].loss == b.trajectory.rows[i].loss);
        CHECK(a.trajectory.rows[i].grad_norm == b.trajectory.rows[i].grad_norm);
        CHECK(a.trajectory.rows[i].max_discrepancy == b.trajectory.rows[i].max_discrepancy);
        CHECK(a.trajectory.rows[i].clipped == b.trajectory.rows[i].clipped);
    }
    const auto c = run_training(Algorithm::kEpisode, objectives, noise, hp, ParameterVector{1.0}, 20);
    CHECK(c.trajectory.rows.back().loss != a.trajectory.rows.back().loss);
}

TEST_CASE("run_training: EPISODE reaches -1/2 while CELGC stays at 0") {
    const auto objectives = make_quadratic_counterexample(2.0);
    const HyperParams hp = make_hp(1.0, 2.0, 1, 10, 2);
    const auto episode =
        run_training(Algorithm::kEpisode, objectives, NoiseModel{}, hp, ParameterVector{0.0}, 0);
    const auto celgc =
        run_training(Algorithm::kCelgc, objectives, NoiseModel{}, hp, ParameterVector{0.0}, 0);
    REQUIRE(episode.trajectory.rows.size() == 11);
    REQUIRE(celgc.trajectory.rows.size() == 11);
    CHECK(episode.trajectory.rows.back().grad_norm == 0.0); // at the minimizer
    for (std::size_t r = 1; r <= 10; ++r) {
        CHECK(episode.trajectory.rows[r].grad_norm == 0.0);
        CHECK(celgc.trajectory.rows[r].grad_norm == 0.5); // stuck at 0
        CHECK(celgc.trajectory.rows[r].loss == 0.0);
    }
}

TEST_CASE("run_training: episode_unclipped forces the unclipped branch") {
    // threshold tiny: EPISODE would clip every round, the ablation never does
    const auto objectives = make_quartic_clients(1.0, 2);
    const HyperParams hp = make_hp(0.001, 0.0001, 2, 5, 2);
    const auto forced = run_training(Algorithm::kEpisodeUnclipped, objectives, NoiseModel{}, hp,
                                     ParameterVector{1.0}, 0);
    for (std::size_t r = 1; r < forced.trajectory.rows.size(); ++r)
        CHECK_FALSE(forced.trajectory.rows[r].clipped);
    const auto episode =
        run_training(Algorithm::kEpisode, objectives, NoiseModel{}, hp, ParameterVector{1.0}, 0);
    CHECK(episode.trajectory.rows[1].clipped);
}

TEST_CASE("run_training: divergence is recorded, not thrown") {
    const std::vector<ObjectivePtr> objectives{std::make_shared<CubicGrowth>()};
    const HyperParams hp = make_hp(10.0, 1e30, 1, 50, 1);
    const auto result = run_training(Algorithm::kFedAvg, objectives, NoiseModel{}, hp,
                                     ParameterVector{2.0}, 0);
    CHECK(result.trajectory.status == RunStatus::kDiverged);
    CHECK(result.trajectory.diverged_round >= 0);
    CHECK(result.trajectory.rows.size() ==
          static_cast<std::size_t>(result.trajectory.diverged_round) + 1);
    for (const auto& row : result.trajectory.rows) {
        CHECK(std::isfinite(row.loss));
        CHECK(std::isfinite(row.grad_norm));
    }
}

TEST_CASE("run_training: trajectories are invariant to the worker thread count") {
    const auto objectives = make_quartic_clients(2.0, 8);
    const NoiseModel noise{1.0, NoiseKind::kUniformPerCoordinate};
    const HyperParams hp = make_hp(0.01, 0.05, 8, 20, 8);
    RunOptions one, many;
    one.threads = 1;
    many.threads = 5;
    const auto a = run_training(Algorithm::kEpisode, objectives, noise, hp, ParameterVector{1.0}, 7, one);
    const auto b = run_training(Algorithm::kEpisode, objectives, noise, hp, ParameterVector{1.0}, 7, many);
    REQUIRE(a.trajectory.rows.size() == b.trajectory.rows.size());
    for (std::size_t i = 0; i < a.trajectory.rows.size(); ++i) {
        CHECK(a.trajectory.rows[i].loss == b.trajectory.rows[i].loss);
        CHECK(a.trajectory.rows[i].grad_norm == b.trajectory.rows[i].grad_norm);
        CHECK(a.trajectory.rows[i].max_discrepancy == b.trajectory.rows[i].max_discrepancy);
    }
}

TEST_CASE("degenerate reduction: N=1, sigma=0, inactive clipping equals plain GD") {
    const std::vector<ObjectivePtr> objectives{std::make_shared<QuarticClient>(1.0, 1)};
    const HyperParams hp = make_hp(0.02, 1e9, 4, 15, 1); // threshold never reached
    const ParameterVector x0{1.0};

    const auto episode = run_training(Algorithm::kEpisode, objectives, NoiseModel{}, hp, x0, 3);
    const auto celgc = run_training(Algorithm::kCelgc, objectives, NoiseModel{}, hp, x0, 3);
    const auto fedavg = run_training(Algorithm::kFedAvg, objectives, NoiseModel{}, hp, x0, 3);
    const auto naive = run_training(Algorithm::kNaiveParallelClip, objectives, NoiseModel{}, hp, x0, 3);

    // independent oracle: plain gradient descent, metrics recorded per round
    double x = 1.0;
    std::vector<double> losses{objectives[0]->value(ParameterVector{x})};
    for (int r = 0; r < 15; ++r) {
        for (std::size_t t = 0; t < 4; ++t) x -= 0.02 * quartic_eval(1.0, 1, x).gradient;
        losses.push_back(objectives[0]->value(ParameterVector{x}));
    }

    for (std::size_t i = 0; i < losses.size(); ++i) {
        CHECK(episode.trajectory.rows[i].loss == losses[i]);
        CHECK(celgc.trajectory.rows[i].loss == losses[i]);
        CHECK(fedavg.trajectory.rows[i].loss == losses[i]);
        CHECK(naive.trajectory.rows[i].loss == losses[i]);
        CHECK(episode.trajectory.rows[i].grad_norm == fedavg.trajectory.rows[i].grad_norm);
        CHECK(episode.trajectory.rows[i].max_discrepancy == fedavg.trajectory.rows[i].max_discrepancy);
        CHECK(naive.trajectory.rows[i].max_discrepancy == fedavg.trajectory.rows[i].max_discrepancy);
    }
}
