// Operator entry point: key-material generation, running sessions in
// either role over TCP, loopback simulation, and the statistical
// verification suite.

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pkd/protocol.hpp"
#include "pkd/stats.hpp"

using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitAbort = 2;
constexpr int kExitUsage = 3;

std::uint64_t fnv1a64(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)v);
    return buf;
}

struct CommonOptions {
    pkd::Params params;
    std::string seed_hex;
    std::uint64_t sessions = 1;
    std::string reconcile_mode = "clear";
    std::uint64_t reuse_limit = 1000;

    pkd::SessionConfig session_config() const {
        pkd::SessionConfig cfg;
        cfg.params = params;
        cfg.mode = reconcile_mode == "otp" ? pkd::ReconcileMode::otp : pkd::ReconcileMode::clear;
        return cfg;
    }
};

void add_param_flags(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--m", opt.params.alphabet_size, "Alphabet size (power of two)")
        ->capture_default_str();
    cmd->add_option("--n", opt.params.symbols, "Substrings per session")->capture_default_str();
    cmd->add_option("--b", opt.params.measure_bits, "Virtual-measurement resolution bits")
        ->capture_default_str();
    cmd->add_option("--s", opt.params.mask_key_bits, "Masking key length")->capture_default_str();
    cmd->add_option("--eps-cor", opt.params.eps_correct, "Correctness failure bound")
        ->capture_default_str();
    cmd->add_option("--eps-sec", opt.params.eps_secret, "Secrecy failure bound")
        ->capture_default_str();
    cmd->add_option("--f-max", opt.params.max_efficiency, "Reconciliation efficiency abort bound")
        ->capture_default_str();
}

void add_seed_flag(CLI::App* cmd, CommonOptions& opt) {
    cmd->add_option("--seed", opt.seed_hex,
                    "64 hex chars; PKD_SEED env is the fallback. Omit for system entropy");
}

// Master source: seeded when a seed was given (flag or PKD_SEED),
// otherwise keyed from system entropy so per-session derivation is
// uniform across both cases.
pkd::EntropySource make_master_source(const std::string& seed_hex) {
    std::string hex = seed_hex;
    if (hex.empty()) {
        const char* env = std::getenv("PKD_SEED");
        if (env != nullptr)
            hex = env;
    }
    if (!hex.empty())
        return pkd::EntropySource::seeded(pkd::parse_seed_hex(hex));
    auto sys = pkd::EntropySource::system();
    return pkd::EntropySource::seeded(sys.draw_seed());
}

json result_record(std::uint64_t session, const pkd::SessionResult& r) {
    json rec;
    rec["session"] = session;
    if (r.aborted)
        rec["aborted"] = pkd::to_string(*r.aborted);
    else
        rec["aborted"] = nullptr;
    rec["ell"] = r.ell;
    rec["lambda"] = r.lambda_actual;
    rec["f_actual"] = r.f_actual;
    rec["parity_bits"] = r.parity_bits_disclosed;
    rec["consumed_bits"] = r.consumed_bits;
    rec["net_gain"] = r.net_gain;
    rec["transcript_digest"] = hex64(r.transcript_digest);
    rec["gamma_bits"] = r.gamma.size();
    rec["gamma_fnv64"] = r.gamma.empty() ? "" : hex64(fnv1a64(r.gamma.to_bytes()));
    return rec;
}

int run_role(bool as_alice, const CommonOptions& opt, const std::string& keys_path,
             pkd::MessageChannel& channel, const std::string& key_out, unsigned timeout_s) {
    channel.timeout = std::chrono::seconds(timeout_s);
    pkd::KeyMaterial keys = pkd::load_key_material(keys_path);
    pkd::SessionConfig cfg = opt.session_config();
    cfg.params = keys.params; // the container fixes the parameter set
    auto master = make_master_source(opt.seed_hex);

    std::ofstream key_file;
    if (!key_out.empty()) {
        key_file.open(key_out, std::ios::trunc);
        if (!key_file) {
            std::cerr << "cannot open " << key_out << " for writing\n";
            return kExitUsage;
        }
    }

    bool any_abort = false;
    for (std::uint64_t i = 0; i < opt.sessions; ++i) {
        auto source = pkd::EntropySource::seeded(master.draw_seed());
        pkd::SessionResult result = as_alice ? pkd::run_alice(cfg, keys, channel, source)
                                             : pkd::run_bob(cfg, keys, channel, source);
        json rec = result_record(i, result);
        if (!as_alice)
            rec["raw_errors"] = result.raw_error_count;
        std::cout << rec.dump() << "\n";
        pkd::save_key_material(keys, keys_path);
        if (result.aborted) {
            any_abort = true;
            std::cerr << "session " << i << " aborted: " << pkd::to_string(*result.aborted)
                      << "\n";
            break;
        }
        if (key_file.is_open()) {
            for (std::uint8_t b : result.gamma.to_bytes()) {
                static const char* digits = "0123456789abcdef";
                key_file << digits[b >> 4] << digits[b & 0xf];
            }
            key_file << "\n";
        }
    }
    return any_abort ? kExitAbort : kExitOk;
}

struct SimulatedSession {
    pkd::SessionResult alice;
    pkd::SessionResult bob;
};

SimulatedSession simulate_one(const pkd::SessionConfig& cfg, pkd::KeyMaterial& alice_keys,
                              pkd::KeyMaterial& bob_keys, const pkd::Seed256& alice_seed,
                              const pkd::Seed256& bob_seed) {
    auto [a_ch, b_ch] = pkd::make_loopback_pair();
    SimulatedSession out;
    std::thread alice_thread([&] {
        auto src = pkd::EntropySource::seeded(alice_seed);
        out.alice = pkd::run_alice(cfg, alice_keys, *a_ch, src);
    });
    auto src = pkd::EntropySource::seeded(bob_seed);
    out.bob = pkd::run_bob(cfg, bob_keys, *b_ch, src);
    alice_thread.join();
    return out;
}

json simulate_record(std::uint64_t session, const SimulatedSession& s) {
    json rec;
    rec["session"] = session;
    rec["alice"] = result_record(session, s.alice);
    rec["alice"].erase("session");
    rec["bob"] = result_record(session, s.bob);
    rec["bob"].erase("session");
    rec["bob"]["raw_errors"] = s.bob.raw_error_count;
    bool match = !s.alice.aborted && !s.bob.aborted && s.alice.gamma == s.bob.gamma &&
                 !s.alice.gamma.empty();
    rec["keys_match"] = match;
    return rec;
}

int cmd_keygen(const CommonOptions& opt, const std::string& out_path) {
    auto master = make_master_source(opt.seed_hex);
    auto source = pkd::EntropySource::seeded(master.draw_seed());
    bool otp = opt.reconcile_mode == "otp";
    pkd::KeyMaterial keys =
        pkd::generate_key_material(opt.params, opt.sessions, source, opt.reuse_limit, otp);
    pkd::save_key_material(keys, out_path);
    std::cout << "wrote " << out_path << ": k_fix " << keys.k_fix.size() << " bits, reserve "
              << keys.reserve.size() << " bits (" << opt.sessions << " sessions"
              << (otp ? ", otp-sized" : "") << ")\n";
    return kExitOk;
}

int cmd_simulate(const CommonOptions& opt, const std::string& keys_path, unsigned jobs) {
    auto master = make_master_source(opt.seed_hex);
    pkd::KeyMaterial alice_keys, bob_keys;
    if (keys_path.empty()) {
        auto keygen_source = pkd::EntropySource::seeded(master.draw_seed());
        alice_keys = pkd::generate_key_material(opt.params, opt.sessions, keygen_source,
                                                opt.reuse_limit,
                                                opt.reconcile_mode == "otp");
        bob_keys = alice_keys;
    } else {
        alice_keys = pkd::load_key_material(keys_path);
        bob_keys = alice_keys;
    }
    pkd::SessionConfig cfg = opt.session_config();
    cfg.params = alice_keys.params;

    std::vector<std::pair<pkd::Seed256, pkd::Seed256>> seeds(opt.sessions);
    for (auto& [a, b] : seeds) {
        a = master.draw_seed();
        b = master.draw_seed();
    }

    bool any_abort = false;
    if (jobs <= 1) {
        for (std::uint64_t i = 0; i < opt.sessions; ++i) {
            SimulatedSession s =
                simulate_one(cfg, alice_keys, bob_keys, seeds[i].first, seeds[i].second);
            std::cout << simulate_record(i, s).dump() << "\n";
            if (!keys_path.empty())
                pkd::save_key_material(alice_keys, keys_path);
            if (s.alice.aborted || s.bob.aborted) {
                any_abort = true;
                std::cerr << "session " << i << " aborted: "
                          << pkd::to_string(s.alice.aborted ? *s.alice.aborted : *s.bob.aborted)
                          << "\n";
                break;
            }
        }
    } else {
        // Concurrent sessions need fixed per-session consumption, which
        // only holds in clear mode.
        if (cfg.mode != pkd::ReconcileMode::clear) {
            std::cerr << "--jobs > 1 requires --reconcile-mode clear\n";
            return kExitUsage;
        }
        std::uint64_t per_session =
            cfg.params.mask_key_bits + cfg.params.rule_bits();
        std::vector<SimulatedSession> results(opt.sessions);
        std::atomic<std::uint64_t> next{0};
        auto worker = [&] {
            for (;;) {
                std::uint64_t i = next.fetch_add(1);
                if (i >= opt.sessions)
                    return;
                pkd::KeyMaterial a = alice_keys;
                a.reserve_consumed += i * per_session;
                a.k_fix_uses += i;
                a.sessions_completed += i;
                pkd::KeyMaterial b = bob_keys;
                b.reserve_consumed += i * per_session;
                b.k_fix_uses += i;
                b.sessions_completed += i;
                results[i] = simulate_one(cfg, a, b, seeds[i].first, seeds[i].second);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < jobs; ++t)
            pool.emplace_back(worker);
        for (auto& t : pool)
            t.join();
        for (std::uint64_t i = 0; i < opt.sessions; ++i) {
            std::cout << simulate_record(i, results[i]).dump() << "\n";
            if (results[i].alice.aborted || results[i].bob.aborted)
                any_abort = true;
            // Sessions that aborted before cutting K/K0 consumed nothing.
            alice_keys.reserve_consumed += results[i].alice.consumed_bits;
            if (results[i].alice.consumed_bits > 0)
                alice_keys.k_fix_uses += 1;
            if (!results[i].alice.aborted)
                alice_keys.sessions_completed += 1;
        }
        if (!keys_path.empty())
            pkd::save_key_material(alice_keys, keys_path);
    }
    return any_abort ? kExitAbort : kExitOk;
}

int cmd_verify_stats(const CommonOptions& opt, const std::string& suite,
                     const std::string& csv_path, std::uint64_t trials) {
    pkd::stats::SuiteOptions sopt;
    sopt.m = opt.params.alphabet_size;
    sopt.measure_bits = opt.params.measure_bits;
    sopt.trials = trials;
    std::string hex = opt.seed_hex;
    if (hex.empty()) {
        const char* env = std::getenv("PKD_SEED");
        if (env != nullptr)
            hex = env;
    }
    if (!hex.empty()) {
        sopt.seed = pkd::parse_seed_hex(hex);
        sopt.seeded = true;
    }

    pkd::stats::CheckReport report;
    if (suite == "discrimination" || suite == "all")
        pkd::stats::check_discrimination(report, sopt);
    if (suite == "joint" || suite == "all")
        pkd::stats::check_joint(report, sopt);
    if (suite == "ber" || suite == "all")
        pkd::stats::check_ber(report, sopt);
    if (suite == "entropy" || suite == "all")
        pkd::stats::check_entropy(report, sopt);

    report.print_table(std::cout);
    std::size_t passed = 0;
    for (const auto& row : report.rows)
        passed += row.pass ? 1 : 0;
    std::cout << passed << "/" << report.rows.size() << " checks passed\n";

    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::trunc);
        if (!csv) {
            std::cerr << "cannot open " << csv_path << " for writing\n";
            return kExitUsage;
        }
        report.write_csv(csv);
    }
    return report.all_pass() ? kExitOk : kExitVerifyFail;
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& hp) {
    auto colon = hp.rfind(':');
    if (colon == std::string::npos)
        throw CLI::ValidationError("endpoint", "expected HOST:PORT");
    int port = std::stoi(hp.substr(colon + 1));
    if (port < 1 || port > 65535)
        throw CLI::ValidationError("endpoint", "port out of range");
    return {hp.substr(0, colon), std::uint16_t(port)};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Probability key distribution toolkit"};
    app.require_subcommand(1);

    CommonOptions opt;

    auto* keygen = app.add_subcommand("keygen", "Generate a pre-shared key-material container");
    std::string out_path;
    keygen->add_option("--out", out_path, "Output file")->required();
    keygen->add_option("--sessions", opt.sessions, "Sessions the pool must cover")
        ->capture_default_str();
    keygen->add_option("--kfix-reuse-limit", opt.reuse_limit, "Masking seed reuse budget")
        ->capture_default_str();
    keygen->add_option("--reconcile-mode", opt.reconcile_mode,
                       "Size the pool for clear or otp sessions")
        ->check(CLI::IsMember({"clear", "otp"}))
        ->capture_default_str();
    add_param_flags(keygen, opt);
    add_seed_flag(keygen, opt);

    auto* alice = app.add_subcommand("alice", "Run sessions as the initiator (listens)");
    std::string keys_path, listen_ep, connect_ep, key_out;
    unsigned timeout_s = 30;
    alice->add_option("--keys", keys_path, "Key-material file")->required();
    alice->add_option("--listen", listen_ep, "HOST:PORT to listen on")->required();
    alice->add_option("--sessions", opt.sessions)->capture_default_str();
    alice->add_option("--key-out", key_out, "Append final keys (hex, one per line)");
    alice->add_option("--timeout", timeout_s, "Receive timeout, seconds")->capture_default_str();
    alice->add_option("--reconcile-mode", opt.reconcile_mode, "clear or otp")
        ->check(CLI::IsMember({"clear", "otp"}))
        ->capture_default_str();
    add_seed_flag(alice, opt);

    auto* bob = app.add_subcommand("bob", "Run sessions as the responder (connects)");
    bob->add_option("--keys", keys_path, "Key-material file")->required();
    bob->add_option("--connect", connect_ep, "HOST:PORT to connect to")->required();
    bob->add_option("--sessions", opt.sessions)->capture_default_str();
    bob->add_option("--key-out", key_out, "Append final keys (hex, one per line)");
    bob->add_option("--timeout", timeout_s, "Receive timeout, seconds")->capture_default_str();
    bob->add_option("--reconcile-mode", opt.reconcile_mode, "clear or otp")
        ->check(CLI::IsMember({"clear", "otp"}))
        ->capture_default_str();
    add_seed_flag(bob, opt);

    auto* simulate = app.add_subcommand("simulate", "Run both roles over loopback");
    unsigned jobs = 1;
    simulate->add_option("--sessions", opt.sessions)->capture_default_str();
    simulate->add_option("--keys", keys_path, "Optional key-material file (consumed, persisted)");
    simulate->add_option("--jobs", jobs, "Concurrent sessions")->capture_default_str();
    simulate->add_option("--reconcile-mode", opt.reconcile_mode, "clear or otp")
        ->check(CLI::IsMember({"clear", "otp"}))
        ->capture_default_str();
    add_param_flags(simulate, opt);
    add_seed_flag(simulate, opt);

    auto* verify = app.add_subcommand("verify-stats", "Statistical verification harness");
    std::string suite = "all", csv_path;
    std::uint64_t trials = 1000000;
    verify->add_option("--suite", suite, "discrimination|joint|ber|entropy|all")
        ->check(CLI::IsMember({"discrimination", "joint", "ber", "entropy", "all"}))
        ->capture_default_str();
    verify->add_option("--trials", trials, "Monte Carlo trials")->capture_default_str();
    verify->add_option("--csv", csv_path, "Write results as CSV");
    verify->add_option("--m", opt.params.alphabet_size)->capture_default_str();
    verify->add_option("--b", opt.params.measure_bits)->capture_default_str();
    add_seed_flag(verify, opt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (keygen->parsed())
            return cmd_keygen(opt, out_path);
        if (alice->parsed()) {
            auto [host, port] = split_host_port(listen_ep);
            auto channel = pkd::tcp_listen_accept(host, port);
            return run_role(true, opt, keys_path, *channel, key_out, timeout_s);
        }
        if (bob->parsed()) {
            auto [host, port] = split_host_port(connect_ep);
            auto channel = pkd::tcp_connect(host, port);
            return run_role(false, opt, keys_path, *channel, key_out, timeout_s);
        }
        if (simulate->parsed())
            return cmd_simulate(opt, keys_path, jobs);
        if (verify->parsed())
            return cmd_verify_stats(opt, suite, csv_path, trials);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
