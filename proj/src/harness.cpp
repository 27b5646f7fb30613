#include "knobtune/harness.hpp"

#include "knobtune/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <thread>

namespace knobtune {

OracleResult brute_force_oracle(const Scenario& scenario, std::size_t phase, const OptimizationSpec& spec)
{
    if (phase >= scenario.phases.size()) {
        throw ContractViolation("phase " + std::to_string(phase) + " out of range");
    }
    const std::uint64_t n = scenario.space.size();
    if (n > kOracleLimit) {
        throw ConfigError("knob space has " + std::to_string(n) + " settings, more than the oracle limit");
    }
    std::optional<OracleResult> best;
    for (std::uint64_t i = 0; i < n; ++i) {
        KnobSetting k = scenario.space.setting_at(i);
        Reading r = evaluate_true(scenario, phase, k);
        if (!spec.feasible(r.constraints)) continue;
        if (!best || spec.better(r.objective, best->value)) {
            best = OracleResult{std::move(k), r.objective, std::move(r)};
        }
    }
    if (!best) throw OracleInfeasibleError("no setting meets every constraint in phase " + std::to_string(phase));
    return *best;
}

OracleResult brute_force_oracle(const Scenario& scenario, std::size_t phase)
{
    return brute_force_oracle(scenario, phase, scenario.spec());
}

double qos(double expected_ctrl, double expected_oracle, Goal goal)
{
    if (goal == Goal::Maximize) {
        if (expected_oracle == 0.0) throw UndefinedQoSError("oracle expectation is zero");
        return expected_ctrl / expected_oracle * 100.0;
    }
    if (expected_ctrl == 0.0) throw UndefinedQoSError("controller expectation is zero");
    return expected_oracle / expected_ctrl * 100.0;
}

TrialRecord run_trial(const Scenario& scenario, Strategy strategy, std::uint64_t seed,
                      const ExperimentConfig& config, std::vector<Measurement> warm_start)
{
    ServerConfig sc;
    sc.total_rounds = config.total_rounds;
    sc.init_rounds = config.init_rounds;
    sc.strategy = strategy;
    sc.threshold = config.threshold;
    sc.consecutive_required = config.consecutive_required;
    sc.seed = seed;
    sc.warm_start = std::move(warm_start);

    auto [server_end, client_end] = make_channel_pair();
    ServerSessionResult server;
    std::thread server_thread([&] { server = serve_session(*server_end, sc); });
    ClientResult client = run_simulated_client(*client_end, scenario, seed, sc.reply_timeout);
    server_thread.join();

    TrialRecord t;
    t.scenario = scenario.name;
    t.strategy = strategy;
    t.seed = seed;
    t.intervals = std::move(client.timeline);
    t.events = std::move(server.log.events);
    t.histories = std::move(server.log.phase_histories);
    t.aborted = server.log.aborted || !client.clean;
    t.error = !server.log.error.empty() ? server.log.error : (client.clean ? "" : client.close_reason);
    analyze_trial(t, scenario);
    return t;
}

void analyze_trial(TrialRecord& trial, const Scenario& scenario)
{
    const OptimizationSpec spec = scenario.spec();
    const int total = scenario.total_intervals();

    trial.choices.clear();
    for (const auto& e : trial.events) {
        if (e.kind != EventKind::KnobChosen || !e.knob) continue;
        ChoiceRecord c;
        c.interval = e.interval;
        c.scenario_phase = scenario.phase_at(std::clamp(e.interval, 0, total - 1));
        c.knob = *e.knob;
        c.fallback = !e.feasible;
        c.truly_feasible = spec.feasible(evaluate_true(scenario, c.scenario_phase, c.knob).constraints);
        trial.choices.push_back(std::move(c));
    }

    trial.phases.assign(scenario.phases.size(), {});
    struct Sums {
        double post = 0.0, incl = 0.0;
        int post_n = 0, incl_n = 0, post_total = 0, post_bad = 0;
    };
    std::vector<Sums> sums(scenario.phases.size());
    for (std::size_t p = 0; p < trial.phases.size(); ++p) trial.phases[p].phase = p;

    for (const auto& rec : trial.intervals) {
        const std::size_t p = rec.scenario_phase;
        const Reading truth = evaluate_true(scenario, p, rec.knob);
        const bool ok = spec.feasible(truth.constraints);
        auto& s = sums[p];
        if (ok) {
            s.incl += truth.objective;
            ++s.incl_n;
        }
        if (!rec.sampling) {
            ++s.post_total;
            if (ok) {
                s.post += truth.objective;
                ++s.post_n;
            } else {
                ++s.post_bad;
            }
            trial.phases[p].chosen = rec.knob;
            trial.phases[p].feasible = ok;
        }
    }
    for (std::size_t p = 0; p < trial.phases.size(); ++p) {
        auto& out = trial.phases[p];
        const auto& s = sums[p];
        if (s.post_n > 0) out.e_obj_post = s.post / s.post_n;
        if (s.incl_n > 0) out.e_obj_incl = s.incl / s.incl_n;
        out.post_intervals = s.post_total;
        out.violation_rate = s.post_total > 0 ? static_cast<double>(s.post_bad) / s.post_total : 0.0;
    }
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& v)
{
    double s = 0.0;
    int n = 0;
    for (const auto& x : v) {
        if (!x) continue;
        s += *x;
        ++n;
    }
    if (n == 0) return std::nullopt;
    return s / n;
}

}  // namespace

std::optional<double> trial_qos(const TrialRecord& trial, const std::vector<OracleResult>& oracles, Goal goal,
                                bool including_sampling)
{
    std::vector<std::optional<double>> per_phase;
    for (const auto& ph : trial.phases) {
        const auto& e = including_sampling ? ph.e_obj_incl : ph.e_obj_post;
        if (e) per_phase.push_back(qos(*e, oracles.at(ph.phase).value, goal));
    }
    return mean_of(per_phase);
}

QoSReport summarize(const std::string& scenario, Strategy strategy, const std::vector<TrialRecord>& trials,
                    const std::vector<OracleResult>& oracles, Goal goal)
{
    QoSReport r;
    r.scenario = scenario;
    r.strategy = strategy;
    double violations = 0.0;
    int phase_rows = 0;
    for (const auto& t : trials) {
        if (t.strategy != strategy) continue;
        ++r.n_trials;
        r.per_seed_post.push_back(trial_qos(t, oracles, goal, false));
        if (r.per_seed_post.back()) ++r.n_defined;
        r.per_seed_incl.push_back(trial_qos(t, oracles, goal, true));
        for (const auto& ph : t.phases) {
            violations += ph.violation_rate;
            ++phase_rows;
        }
    }
    r.mean_qos_post = mean_of(r.per_seed_post).value_or(0.0);
    r.mean_qos_incl = mean_of(r.per_seed_incl).value_or(0.0);
    r.violation_rate = phase_rows > 0 ? violations / phase_rows : 0.0;
    return r;
}

ExperimentResult run_experiment(const ExperimentConfig& config)
{
    config.scenario.validate();
    if (config.strategies.empty()) throw ConfigError("no strategies given");
    if (config.seeds.empty()) throw ConfigError("no seeds given");
    for (Strategy s : config.strategies) {
        SamplingSchedule sched = SamplingSchedule::with_default_init(config.total_rounds, s);
        if (config.init_rounds > 0) sched.init_rounds = config.init_rounds;
        sched.validate();
    }

    ExperimentResult result;
    const OptimizationSpec spec = config.scenario.spec();
    for (std::size_t p = 0; p < config.scenario.phases.size(); ++p) {
        result.oracles.push_back(brute_force_oracle(config.scenario, p, spec));
    }

    struct Job {
        Strategy strategy;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (Strategy s : config.strategies) {
        for (std::uint64_t seed : config.seeds) jobs.push_back({s, seed});
    }
    result.trials.resize(jobs.size());

    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            const Job& job = jobs[i];
            std::vector<Measurement> warm;
            if (config.warm_start_from_prior) {
                TrialRecord prior = run_trial(config.scenario, job.strategy, mix_seed(job.seed, 0x5eed5eedULL), config);
                if (!prior.histories.empty()) warm = prior.histories.front();
            }
            try {
                result.trials[i] = run_trial(config.scenario, job.strategy, job.seed, config, std::move(warm));
            } catch (const std::exception& e) {
                TrialRecord t;
                t.scenario = config.scenario.name;
                t.strategy = job.strategy;
                t.seed = job.seed;
                t.aborted = true;
                t.error = e.what();
                analyze_trial(t, config.scenario);
                result.trials[i] = std::move(t);
            }
        }
    };
    unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(jobs.size()));
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    for (Strategy s : config.strategies) {
        result.reports.push_back(summarize(config.scenario.name, s, result.trials, result.oracles,
                                           spec.objective.goal));
    }
    return result;
}

namespace {

std::string fixed(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fixed(const std::optional<double>& v)
{
    return v ? fixed(*v) : std::string();
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

const char* kTrialsHeader =
    "scenario,strategy,seed,phase,chosen_knob,feasible,e_obj_post,e_obj_incl_sampling,violation_rate";

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<TrialRecord>& trials)
{
    out << kTrialsHeader << '\n';
    for (const auto& t : trials) {
        for (const auto& ph : t.phases) {
            out << t.scenario << ',' << to_string(t.strategy) << ',' << t.seed << ',' << ph.phase << ','
                << (ph.chosen ? to_string(*ph.chosen) : "") << ',' << (ph.feasible ? 1 : 0) << ','
                << fixed(ph.e_obj_post) << ',' << fixed(ph.e_obj_incl) << ',' << fixed(ph.violation_rate)
                << '\n';
        }
    }
}

void write_summary_csv(std::ostream& out, const std::vector<QoSReport>& reports)
{
    out << "scenario,strategy,mean_qos_post,mean_qos_incl,violation_rate,n_trials\n";
    for (const auto& r : reports) {
        out << r.scenario << ',' << to_string(r.strategy) << ',' << fixed(r.mean_qos_post) << ','
            << fixed(r.mean_qos_incl) << ',' << fixed(r.violation_rate) << ',' << r.n_trials << '\n';
    }
}

std::vector<TrialRow> read_trials_csv(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("trials csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTrialsHeader) throw ConfigError("trials csv: unexpected header '" + line + "'");
    std::vector<TrialRow> rows;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv(line);
        const std::string where = "trials csv line " + std::to_string(lineno);
        if (cells.size() != 9) throw ConfigError(where + ": expected 9 columns");
        try {
            TrialRow r;
            r.scenario = cells[0];
            r.strategy = cells[1];
            r.seed = std::stoull(cells[2]);
            r.phase = std::stoul(cells[3]);
            r.chosen_knob = cells[4];
            r.feasible = cells[5] == "1";
            if (!cells[6].empty()) r.e_obj_post = std::stod(cells[6]);
            if (!cells[7].empty()) r.e_obj_incl = std::stod(cells[7]);
            r.violation_rate = std::stod(cells[8]);
            rows.push_back(std::move(r));
        } catch (const std::logic_error&) {
            throw ConfigError(where + ": bad number");
        }
    }
    return rows;
}

std::vector<QoSReport> summarize_rows(const std::vector<TrialRow>& rows, const Scenario& scenario)
{
    const OptimizationSpec spec = scenario.spec();
    std::vector<OracleResult> oracles;
    for (std::size_t p = 0; p < scenario.phases.size(); ++p) oracles.push_back(brute_force_oracle(scenario, p, spec));

    // Rebuild per-trial phase outcomes, keeping first-appearance order of strategies.
    std::vector<std::string> order;
    std::map<std::string, std::vector<TrialRecord>> by_strategy;
    std::map<std::pair<std::string, std::uint64_t>, std::size_t> index;
    for (const auto& r : rows) {
        if (r.phase >= oracles.size()) throw ConfigError("trials csv: phase out of range for the scenario");
        if (!by_strategy.count(r.strategy)) order.push_back(r.strategy);
        auto& trials = by_strategy[r.strategy];
        const auto key = std::make_pair(r.strategy, r.seed);
        auto it = index.find(key);
        if (it == index.end()) {
            TrialRecord t;
            t.scenario = r.scenario;
            t.strategy = parse_strategy(r.strategy);
            t.seed = r.seed;
            trials.push_back(std::move(t));
            it = index.emplace(key, trials.size() - 1).first;
        }
        PhaseOutcome ph;
        ph.phase = r.phase;
        ph.feasible = r.feasible;
        ph.e_obj_post = r.e_obj_post;
        ph.e_obj_incl = r.e_obj_incl;
        ph.violation_rate = r.violation_rate;
        trials[it->second].phases.push_back(ph);
    }
    std::vector<QoSReport> reports;
    for (const auto& name : order) {
        const auto& trials = by_strategy[name];
        reports.push_back(summarize(trials.front().scenario, trials.front().strategy, trials, oracles,
                                    spec.objective.goal));
    }
    return reports;
}

}  // namespace knobtune
