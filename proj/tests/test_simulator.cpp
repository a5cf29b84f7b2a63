#include <doctest.h>

#include <cmath>
#include <vector>

#include "freshsched/analytic.hpp"
#include "freshsched/error.hpp"
#include "freshsched/simulator.hpp"

using namespace freshsched;

namespace {

SimConfig cfg(double horizon, std::uint32_t reps = 10, double warmup = 0.0) {
  SimConfig c;
  c.horizon = horizon;
  c.replications = reps;
  c.warmup = warmup;
  return c;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const char* kPolicies[] = {"fcfs", "query-1", "query-3", "update-1", "update-3", "joint-3-3", "query-inf"};

}  // namespace

TEST_CASE("inverse transform examples") {
  CHECK(exponential_from_uniform(1.0, std::exp(-1.0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(exponential_from_uniform(2.0, std::exp(-1.0)) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("exponential sample mean over a million draws") {
  RngStream s(20190501, 0, 0);
  double sum = 0.0;
  constexpr int n = 1'000'000;
  for (int i = 0; i < n; ++i) {
    const double x = sample_exponential(1.0, s);
    REQUIRE(x > 0.0);
    sum += x;
  }
  CHECK(std::abs(sum / n - 1.0) < 0.005);
}

TEST_CASE("streams are deterministic and distinct") {
  RngStream a(1, 2, 3), b(1, 2, 3), c(1, 2, 2), d(1, 3, 3);
  bool differs_c = false, differs_d = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform_open();
    REQUIRE(x > 0.0);
    REQUIRE(x < 1.0);
    REQUIRE(x == b.uniform_open());
    differs_c |= x != c.uniform_open();
    differs_d |= x != d.uniform_open();
  }
  CHECK(differs_c);
  CHECK(differs_d);
}

TEST_CASE("aoi tracker: single update geometry") {
  AoiTracker t;
  t.record_update_departure(1.0, 3.0);
  REQUIRE(t.paoi_samples().size() == 1);
  CHECK(t.paoi_samples()[0] == 3.0);
  CHECK(t.current_age() == 2.0);
  // age grew from 0 to 3 over [0, 3]
  CHECK(t.age_integral() == doctest::Approx(4.5));
  t.advance(5.0);
  CHECK(t.age_integral() == doctest::Approx(4.5 + 6.0));
}

TEST_CASE("aoi tracker: second sample is X + T") {
  AoiTracker t;
  t.record_update_departure(1.0, 2.0);
  t.record_update_departure(1.5, 4.0);
  REQUIRE(t.paoi_samples().size() == 2);
  CHECK(t.paoi_samples()[1] == doctest::Approx(3.0));
  CHECK(t.paoi_samples()[1] == (1.5 - 1.0) + (4.0 - 1.5));
  CHECK(t.current_age() == doctest::Approx(2.5));
}

TEST_CASE("aoi tracker: zero-delay delivery and ordering errors") {
  AoiTracker t;
  t.record_update_departure(2.0, 2.0);
  CHECK(t.current_age() == 0.0);
  CHECK_THROWS_AS(t.record_update_departure(1.0, 3.0), Error);
  CHECK_THROWS_AS(t.record_update_departure(5.0, 4.0), Error);
  try {
    t.record_update_departure(1.0, 6.0);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfOrderDeparture);
  }
}

TEST_CASE("aoi tracker: integral only over the window and nondecreasing") {
  AoiTracker t(2.0);
  t.advance(1.0);
  CHECK(t.age_integral() == 0.0);
  t.record_update_departure(1.0, 3.0);
  CHECK(t.age_integral() == doctest::Approx(2.5));  // age 2 -> 3 over (2, 3]
  t.advance(5.0);
  CHECK(t.age_integral() == doctest::Approx(8.5));
  double last = t.age_integral();
  for (double now = 5.5; now < 20.0; now += 0.75) {
    if (static_cast<int>(now) % 3 == 0) t.record_update_departure(now - 0.25, now);
    t.advance(now);
    CHECK(t.age_integral() >= last);
    last = t.age_integral();
  }
  AoiTracker early(10.0);
  early.record_update_departure(1.0, 3.0);
  CHECK(early.paoi_samples().empty());
}

TEST_CASE("finalize metrics") {
  AoiTracker t;
  t.record_update_departure(1.0, 3.0);
  t.advance(5.0);
  WindowSums sums;
  sums.completed_updates = 1;
  sums.update_time_sum = 2.0;
  sums.nq_integral = 0.0;
  sums.nu_integral = 2.0;
  const auto m = finalize_metrics(t, sums, 5.0, 0.0);
  CHECK(*m.mean_aoi == doctest::Approx(10.5 / 5.0));
  CHECK(*m.mean_paoi == 3.0);
  CHECK(*m.mean_update_system_time == 2.0);
  CHECK_FALSE(m.mean_response_time);  // no completed queries
  CHECK(*m.mean_nu == doctest::Approx(0.4));

  // hand-integrated sawtooth over a length-10 window
  AoiTracker flat;
  flat.advance(2.0);                        // integral 2
  flat.record_update_departure(2.0, 2.0);   // age 0
  flat.advance(4.0);                        // +2
  flat.record_update_departure(3.0, 4.0);   // age 1
  flat.advance(10.0);                       // 6 * (1 + 7) / 2 = 24
  CHECK(finalize_metrics(flat, {}, 10.0, 0.0).mean_aoi == doctest::Approx(2.8));
}

TEST_CASE("event queue ordering") {
  EventQueue q;
  q.set_arrival(JobClass::Update, 1.0);
  q.set_arrival(JobClass::Query, 1.0);
  CHECK(q.next().kind == EventQueue::Kind::ArrivalUpdate);
  q.set_completion(JobClass::Query, 1.0);
  CHECK(q.next().kind == EventQueue::Kind::DepartureQuery);
  q.clear_completion();
  q.set_arrival(JobClass::Update, 2.0);
  CHECK(q.next().kind == EventQueue::Kind::ArrivalQuery);
  CHECK(to_trigger(EventQueue::Kind::DepartureUpdate) == Trigger::DepartureUpdate);
}

TEST_CASE("aggregate statistics") {
  std::vector<ReplicationMetrics> same(4);
  for (auto& m : same) m.mean_paoi = 7.5;
  const auto s = aggregate(same);
  CHECK(*s.paoi.mean == 7.5);
  CHECK(*s.paoi.half_width == 0.0);
  CHECK(s.paoi.count == 4);
  CHECK_FALSE(s.response_time.mean);

  const std::vector<double> two{2.0, 4.0};
  const auto t = summarize(two);
  CHECK(*t.mean == 3.0);
  CHECK(*t.stddev == doctest::Approx(std::sqrt(2.0)));
  CHECK(*t.half_width == doctest::Approx(1.96 * std::sqrt(2.0) / std::sqrt(2.0)));

  const std::vector<double> one{1.0};
  CHECK_FALSE(summarize(one).half_width);
}

TEST_CASE("sim config validation") {
  CHECK_NOTHROW(cfg(100).validate());
  CHECK_NOTHROW(cfg(100, 1, 100).validate());
  CHECK_THROWS_AS(cfg(100, 0).validate(), Error);
  CHECK_THROWS_AS(cfg(100, 1, 200).validate(), Error);
  CHECK_THROWS_AS(cfg(100, 1, -1).validate(), Error);
}

TEST_CASE("fcfs simulation reproduces the closed form") {
  const auto p = validate_params(0.5, 1, 0.1, 1);
  const auto s = aggregate(run_replications(p, PolicySpec::fcfs(), cfg(20000)));
  CHECK(rel(*s.response_time.mean, 2.5) < 0.05);
  CHECK(rel(*s.paoi.mean, 4.5) < 0.05);
}

TEST_CASE("query-1 response time does not depend on the update load") {
  for (double lu : {0.2, 0.5, 0.85}) {
    const auto p = validate_params(lu, 1, 0.1, 1);
    const auto s = aggregate(run_replications(p, PolicySpec::parse("query-1"), cfg(20000)));
    CHECK(rel(*s.response_time.mean, 1.0 + 0.1 / 0.9) < 0.05);
  }
}

TEST_CASE("single-threshold k=1 simulations match the priority formulas within CI") {
  const auto p = validate_params(1.0 / 3, 1, 1.0 / 3, 1);
  const auto q = aggregate(run_replications(p, PolicySpec::parse("query-1"), cfg(20000)));
  const auto qa = query1_metrics(p);
  CHECK(std::abs(*q.response_time.mean - qa.expected_response_time) <= 2 * *q.response_time.half_width);
  CHECK(std::abs(*q.paoi.mean - qa.expected_paoi) <= 2 * *q.paoi.half_width);
  const auto u = aggregate(run_replications(p, PolicySpec::parse("update-1"), cfg(20000)));
  const auto ua = update1_metrics(p);
  CHECK(std::abs(*u.response_time.mean - ua.expected_response_time) <= 2 * *u.response_time.half_width);
  CHECK(std::abs(*u.paoi.mean - ua.expected_paoi) <= 2 * *u.paoi.half_width);
}

TEST_CASE("update-only system behaves as M/M/1") {
  // a vanishing query stream stands in for lambda_q = 0
  const auto p = validate_params(0.5, 1, 1e-12, 1);
  const auto runs = run_replications(p, PolicySpec::fcfs(), cfg(20000));
  const auto s = aggregate(runs);
  CHECK(rel(*s.paoi.mean, 1 / 0.5 + 1 / (1 - 0.5)) < 0.05);
  CHECK_FALSE(s.response_time.mean);
  for (const auto& m : runs) CHECK(littles_law_residual(m, p).query == 0.0);
}

TEST_CASE("zero-length measurement window") {
  const auto p = validate_params(0.4, 1, 0.4, 1);
  const auto m = run_replication(p, PolicySpec::fcfs(), cfg(500, 1, 500), 0);
  CHECK(m.completed_queries == 0);
  CHECK(m.completed_updates == 0);
  CHECK_FALSE(m.mean_response_time);
  CHECK_FALSE(m.mean_paoi);
  CHECK_FALSE(m.mean_aoi);
  CHECK_FALSE(m.mean_nq);
}

TEST_CASE("per-sample peak age identity and FIFO update departures") {
  const auto p = validate_params(0.5, 1, 0.3, 1);
  for (const char* name : kPolicies) {
    SimTrace trace;
    run_replication(p, PolicySpec::parse(name), cfg(20000), 0, &trace);
    REQUIRE(trace.updates.size() > 5000);
    double prev_completion = 0.0;
    double prev_arrival = 0.0;
    for (const auto& u : trace.updates) {
      CHECK(u.previous_arrival == prev_arrival);
      CHECK(u.paoi == (u.arrival - u.previous_arrival) + (u.completion - u.arrival));
      CHECK(u.completion >= prev_completion);
      prev_completion = u.completion;
      prev_arrival = u.arrival;
    }
  }
}

TEST_CASE("work conservation and job records") {
  const auto p = validate_params(0.45, 1.2, 0.35, 0.9);
  for (const char* name : kPolicies) {
    SimTrace trace;
    const auto m = run_replication(p, PolicySpec::parse(name), cfg(5000), 3, &trace);
    CHECK(m.busy_time == doctest::Approx(m.completed_work + m.partial_work).epsilon(1e-9));
    double completed = 0.0;
    for (const auto& j : trace.jobs) {
      if (!j.completion_time) continue;
      completed += j.service_requirement;
      const double slack = 1e-12 * std::max(1.0, *j.completion_time);
      CHECK(*j.completion_time - j.arrival_time >= j.service_requirement - slack);
    }
    CHECK(completed == doctest::Approx(m.completed_work).epsilon(1e-9));
    // unbounded thresholds serve exhaustively and never interrupt a job
    const std::string n = name;
    const bool preemptive = n != "fcfs" && n.find("inf") == std::string::npos;
    if (preemptive) CHECK(trace.preemptions > 0);
    else CHECK(trace.preemptions == 0);
  }
}

TEST_CASE("common random numbers") {
  const auto p = validate_params(0.3, 1, 0.4, 1);
  const auto a = run_replication(p, PolicySpec::parse("query-3"), cfg(3000), 4);
  const auto b = run_replication(p, PolicySpec::parse("query-3"), cfg(3000), 4);
  CHECK(*a.mean_paoi == *b.mean_paoi);
  CHECK(*a.mean_aoi == *b.mean_aoi);
  CHECK(*a.mean_response_time == *b.mean_response_time);
  CHECK(*a.mean_nq == *b.mean_nq);

  // same arrivals and requirements whatever the policy
  SimTrace fcfs, q1;
  run_replication(p, PolicySpec::fcfs(), cfg(3000), 4, &fcfs);
  run_replication(p, PolicySpec::parse("query-1"), cfg(3000), 4, &q1);
  REQUIRE(fcfs.jobs.size() == q1.jobs.size());
  for (std::size_t i = 0; i < fcfs.jobs.size(); ++i) {
    CHECK(fcfs.jobs[i].arrival_time == q1.jobs[i].arrival_time);
    CHECK(fcfs.jobs[i].service_requirement == q1.jobs[i].service_requirement);
  }

  // thread count does not change anything
  const auto serial = run_replications(p, PolicySpec::parse("joint-2-3"), cfg(2000, 6), 1);
  const auto parallel = run_replications(p, PolicySpec::parse("joint-2-3"), cfg(2000, 6), 4);
  for (std::size_t i = 0; i < serial.size(); ++i) {
    CHECK(*serial[i].mean_paoi == *parallel[i].mean_paoi);
    CHECK(*serial[i].mean_nu == *parallel[i].mean_nu);
  }
}

TEST_CASE("conservation law holds in simulation for every policy") {
  const auto p = validate_params(0.5, 1, 0.1, 1);
  const double rhs = conservation_rhs(p);
  CHECK(rhs == doctest::Approx(1.5));
  for (const char* name : kPolicies) {
    const auto s = aggregate(run_replications(p, PolicySpec::parse(name), cfg(20000)));
    CAPTURE(name);
    CHECK(rel(*s.nq.mean + *s.nu.mean, rhs) < 0.03);
  }
}

TEST_CASE("little's law residuals") {
  const auto p = validate_params(0.4, 1, 0.3, 1);
  for (const char* name : kPolicies) {
    for (const auto& m : run_replications(p, PolicySpec::parse(name), cfg(20000))) {
      const auto r = littles_law_residual(m, p);
      CHECK(r.reliable);
      CHECK(r.query < 0.03);
      CHECK(r.update < 0.03);
    }
  }
  const auto hot = validate_params(0.7, 1, 0.6, 1);
  const auto m = run_replication(hot, PolicySpec::fcfs(), cfg(2000), 0);
  const auto r = littles_law_residual(m, hot);
  CHECK_FALSE(r.reliable);
  CHECK(std::isfinite(r.query));
}

TEST_CASE("peak age is at least the average age") {
  for (double lu : {0.3, 0.5, 0.8}) {
    const auto p = validate_params(lu, 1, 0.1, 1);
    for (const char* name : kPolicies) {
      for (const auto& m : run_replications(p, PolicySpec::parse(name), cfg(20000, 4))) {
        CAPTURE(name);
        CAPTURE(lu);
        CHECK(*m.mean_paoi >= *m.mean_aoi);
      }
    }
  }
  // Sparse updates: the per-run gap is dominated by the sampled second moment
  // of the inter-arrival time, so compare the paired difference with its CI.
  const auto p = validate_params(0.1, 1, 0.2, 1);
  for (const char* name : kPolicies) {
    std::vector<double> diff;
    for (const auto& m : run_replications(p, PolicySpec::parse(name), cfg(20000))) {
      diff.push_back(*m.mean_paoi - *m.mean_aoi);
    }
    const auto s = summarize(diff);
    CAPTURE(name);
    CHECK(*s.mean + *s.half_width >= 0.0);
  }
}
