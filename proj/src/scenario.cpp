#include "provql/scenario.hpp"

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace provql {

using nlohmann::json;

namespace {

constexpr std::int64_t kSecond = 1'000'000'000;
constexpr std::int64_t kMilli = 1'000'000;
constexpr std::int64_t kBase = 1'724'731'000'000'000'000;  // scenario epoch

struct Key {
  json j;
  std::string canon;
};

Key file_key(const std::string& host, const std::string& path) {
  Key k;
  k.j = {{"kind", "file"}, {"host", host}, {"path", path}};
  k.canon = "file|" + host + "|" + path;
  return k;
}

Key proc_key(const std::string& host, std::uint64_t pid, const std::string& name) {
  Key k;
  k.j = {{"kind", "process"}, {"host", host}, {"pid", pid}, {"name", name}};
  k.canon = "process|" + host + "|" + std::to_string(pid) + ":" + name;
  return k;
}

Key net_key(const std::string& host, const std::string& sip, std::uint32_t sp,
            const std::string& dip, std::uint32_t dp) {
  Key k;
  k.j = {{"kind", "network"}, {"host", host}, {"src_ip", sip}, {"src_port", sp},
         {"dst_ip", dip},     {"dst_port", dp}};
  std::ostringstream os;
  os << "network|" << host << "|" << sip << ":" << sp << ">" << dip << ":" << dp;
  k.canon = os.str();
  return k;
}

struct Rec {
  json src, dst;
  std::string op;
  std::string host;
  std::int64_t start = 0, end = 0;
  std::uint64_t amount = 0;
  bool critical = false;
  std::uint64_t id = 0;  // assigned after the time sort
};

struct Generator {
  std::mt19937_64 rng;
  std::vector<Rec> recs;
  std::set<std::string> keys;

  explicit Generator(std::uint64_t seed) : rng(seed) {}

  std::int64_t uniform(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
  }

  void track(const Key& k) { keys.insert(k.canon); }

  void emit(const Key& src, const Key& dst, const std::string& op, const std::string& host,
            std::int64_t start, std::int64_t end, std::uint64_t amount, bool critical) {
    track(src);
    track(dst);
    Rec r;
    r.src = src.j;
    r.dst = dst.j;
    r.op = op;
    r.host = host;
    r.start = start;
    r.end = std::max(end, start);
    r.amount = amount;
    r.critical = critical;
    recs.push_back(std::move(r));
  }

  // A burst of `n` raw events whose amounts sum exactly to `total`,
  // spread over [t0, t0 + span].
  void burst(const Key& src, const Key& dst, const std::string& op, const std::string& host,
             std::int64_t t0, std::int64_t span, std::uint64_t total, int n, bool critical) {
    if (n < 1) n = 1;
    std::int64_t step = std::max<std::int64_t>(span / n, 1);
    std::uint64_t chunk = total / n;
    std::uint64_t carry = total - chunk * (n - 1);
    for (int i = 0; i < n; ++i) {
      std::int64_t s = t0 + i * step + uniform(0, step / 4 + 1);
      std::int64_t e = s + std::max<std::int64_t>(step / 2, 1);
      emit(src, dst, op, host, s, e, i == n - 1 ? carry : chunk, critical);
    }
  }

  // Amounts for noise edges stay away from the attack payload size so the
  // data-flow feature separates the clusters.
  std::uint64_t noise_amount(std::uint64_t payload) {
    while (true) {
      auto a = static_cast<std::uint64_t>(uniform(64, 60'000));
      if (a + 128 < payload || a > payload + 128) return a;
    }
  }
};

struct PoiSpec {
  std::string pattern;
  std::uint64_t event_id = 0;     // filled for id-bound patterns after sorting
  std::size_t rec_index = 0;      // which Rec carries the POI
  bool id_bound = false;
  std::int64_t cutoff = 0;        // forward cutoff literal
  std::string host;
};

std::string file_poi_pattern(const std::string& host, const std::string& path) {
  return "(p:Process)-[st:FileEvent{optype:\"write\"}]->(f:File{name:\"" + path +
         "\", hostid:\"" + host + "\"})";
}

std::string net_poi_pattern(std::uint64_t id, const std::string& host, const std::string& sip,
                            const std::string& dip) {
  return "(p:Process)-[st:NetworkEvent{id:" + std::to_string(id) + "}]->(f:Network{srcip:\"" +
         sip + "\",dstip:\"" + dip + "\",hostid:\"" + host + "\"})";
}

std::string sub_query_text(const std::string& poi_pattern, const std::string& g_back,
                           const std::string& g_fwd, std::int64_t cutoff, int top_k) {
  std::ostringstream os;
  os << "MATCH " << poi_pattern << "\n"
     << "        BFS (r IN backward(f) | MATCH v=dst(r) WHERE r.starttime<max(collect(vout IN "
        "out(v) | vout.endtime))) YIELD "
     << g_back << "\n"
     << "        UNWIND " << g_back << " AS e\n"
     << "        SET e.weight=projection(1/(abs(r.amount-st.amount)+0.0001),ln(1+1/"
        "abs(r.endtime-st.endtime)),count(out(v))/count(in(v)))\n"
     << "        MATCH u=src(e) SET u.rel=reduce(sum = 0, o IN out(u) | "
        "sum+o.weight*dst(o).rel)\n"
     << "        RETURN " << g_back << "\n"
     << "intersect\n"
     << "WITH entry = (MATCH n in nodes(r) WHERE count(in(n))=0 ORDER BY n.rel DESC LIMIT "
     << top_k << ")\n"
     << "        BFS (re IN forward(entry) | MATCH u=src(re) WHERE re.endtime>min(collect(uin IN "
        "in(u) | uin.starttime)) and re.starttime<"
     << cutoff << ") yield " << g_fwd << "\n"
     << "        RETURN " << g_fwd;
  return os.str();
}

std::string weight_query_text(const std::string& poi_pattern) {
  std::ostringstream os;
  os << "MATCH " << poi_pattern << "\n"
     << "        BFS (r IN backward(f) | MATCH v=dst(r) WHERE r.starttime<max(collect(vout IN "
        "out(v) | vout.endtime))) YIELD g1\n"
     << "        UNWIND g1 AS e\n"
     << "        SET e.weight=projection(1/(abs(r.amount-st.amount)+0.0001),ln(1+1/"
        "abs(r.endtime-st.endtime)),count(out(v))/count(in(v)))\n"
     << "        WITH e WHERE e.weight >=0.5\n"
     << "        RETURN g1";
  return os.str();
}

// Hosts and addresses; the attacker address follows the query examples.
const char* kHost1 = "1";
const char* kHost2 = "2";
const char* kAttackerIp = "192.168.1.128";
const char* kHost1Ip = "192.168.1.131";
const char* kHost2Ip = "192.168.1.132";
const char* kServerIp = "203.0.113.7";
const char* kRepoIp = "198.51.100.3";
const char* kC2Ip = "203.0.113.99";

struct ChainBuilder {
  Generator& gen;
  std::uint64_t payload;
  std::int64_t t;  // current attack clock

  std::int64_t step(std::int64_t lo_ms, std::int64_t hi_ms) {
    t += gen.uniform(lo_ms * kMilli, hi_ms * kMilli);
    return t;
  }
};

// Benign ancestry shared by all scenarios: per-host package installer that
// downloads packages and writes the library files the attack processes
// later read. Entry roots contributed: one repo connection per host.
struct HostInfra {
  Key repo_conn;
  Key installer;
  std::vector<Key> libs;
  Key passwd;  // /etc/passwd, written by the installer
};

HostInfra build_infra(Generator& gen, const std::string& host, const std::string& host_ip,
                      int lib_count, std::uint64_t payload) {
  HostInfra infra;
  infra.repo_conn = net_key(host, kRepoIp, 443, host_ip, 51000);
  infra.installer = proc_key(host, 400, "pkgd");
  infra.passwd = file_key(host, "/etc/passwd");
  std::int64_t t = kBase + gen.uniform(1 * kSecond, 3 * kSecond);
  gen.burst(infra.repo_conn, infra.installer, "recvmsg", host, t, 800 * kMilli,
            gen.noise_amount(payload), 32, false);
  for (int i = 0; i < lib_count; ++i) {
    infra.libs.push_back(file_key(host, "/usr/lib/libsys" + std::to_string(i) + ".so"));
    t += gen.uniform(100 * kMilli, 400 * kMilli);
    gen.burst(infra.installer, infra.libs.back(), "write", host, t, 300 * kMilli,
              gen.noise_amount(payload), gen.uniform(16, 28), false);
  }
  t += gen.uniform(100 * kMilli, 300 * kMilli);
  gen.burst(infra.installer, infra.passwd, "write", host, t, 100 * kMilli,
            gen.noise_amount(payload), 4, false);
  return infra;
}

// The attack processes read a handful of libraries when they start; these
// reads pull the benign ancestry into the backward graph (the dependency
// explosion the weighting stage is there to tame).
void lib_reads(Generator& gen, const HostInfra& infra, const Key& proc, const std::string& host,
               std::int64_t t, std::uint64_t payload) {
  int n = static_cast<int>(gen.uniform(4, std::min<std::int64_t>(8, infra.libs.size())));
  for (int i = 0; i < n; ++i) {
    const Key& lib = infra.libs[static_cast<std::size_t>(gen.uniform(0, infra.libs.size() - 1))];
    gen.burst(lib, proc, "read", host, t + i * 20 * kMilli, 15 * kMilli,
              gen.noise_amount(payload), gen.uniform(14, 26), false);
  }
}

// Background noise: rootless worker processes arriving Poisson-style, each
// reading libraries and writing its own temp files. They never write into
// attack or ancestry nodes, so they stay out of the backward closure.
void background_noise(Generator& gen, const std::vector<HostInfra>& infra, std::uint64_t scale,
                      std::uint64_t payload) {
  std::int64_t window = 60 * kSecond;
  std::uint64_t emitted = 0;
  int wid = 0;
  std::exponential_distribution<double> gap(static_cast<double>(scale) / window);
  double tcur = 0;
  while (emitted < scale) {
    tcur += gap(gen.rng);
    std::int64_t t = kBase + static_cast<std::int64_t>(tcur);
    if (t > kBase + window) tcur = 0;
    const std::string host = (wid % 2 == 0) ? kHost1 : kHost2;
    const HostInfra& hi = infra[wid % 2];
    Key w = proc_key(host, 2000 + wid, "worker");
    ++wid;
    int reads = static_cast<int>(gen.uniform(1, 3));
    for (int i = 0; i < reads && emitted < scale; ++i) {
      const Key& lib = hi.libs[static_cast<std::size_t>(gen.uniform(0, hi.libs.size() - 1))];
      int n = static_cast<int>(gen.uniform(2, 6));
      gen.burst(lib, w, "read", host, t + i * 10 * kMilli, 8 * kMilli, gen.noise_amount(payload),
                n, false);
      emitted += n;
    }
    int writes = static_cast<int>(gen.uniform(1, 3));
    for (int i = 0; i < writes && emitted < scale; ++i) {
      Key tmp = file_key(host, "/tmp/work_" + std::to_string(wid) + "_" + std::to_string(i));
      int n = static_cast<int>(gen.uniform(2, 8));
      gen.burst(w, tmp, "write", host, t + (reads + i) * 10 * kMilli, 8 * kMilli,
                gen.noise_amount(payload), n, false);
      emitted += n;
    }
  }
}

struct ScenarioPlan {
  std::vector<std::string> entry_keys;
  std::size_t poi1_rec = 0;  // index of the POI record in gen.recs
  std::size_t poi2_rec = 0;
  std::string poi1_pattern_prefix;  // pattern text; id patched in later if needed
  bool poi1_id_bound = false;
  bool poi2_id_bound = true;
  std::string poi1_host, poi2_host;
  std::string poi2_sip, poi2_dip;
};

}  // namespace

ScenarioOutput generate_scenario(const std::string& scenario, std::uint64_t scale,
                                 std::uint64_t seed) {
  Generator gen(seed ^ 0x70726f766c71ULL);
  const std::uint64_t payload = 337'845;

  std::vector<HostInfra> infra;
  infra.push_back(build_infra(gen, kHost1, kHost1Ip, 8, payload));
  infra.push_back(build_infra(gen, kHost2, kHost2Ip, 8, payload));

  // Entry roots common to every scenario narrative.
  Key attacker_conn = net_key(kHost1, kAttackerIp, 4444, kHost1Ip, 80);
  Key srv_conn1 = net_key(kHost1, kServerIp, 80, kHost1Ip, 52001);
  Key srv_conn2 = net_key(kHost1, kServerIp, 80, kHost1Ip, 52002);
  Key srv_conn3 = net_key(kHost2, kServerIp, 80, kHost2Ip, 52003);
  Key transfer1 = net_key(kHost1, kHost1Ip, 40001, kHost2Ip, 22);  // h1 -> h2
  Key transfer2 = net_key(kHost2, kHost2Ip, 40002, kHost1Ip, 22);  // h2 -> h1

  Key bash1 = proc_key(kHost1, 1001, "bash");
  Key wget1 = proc_key(kHost1, 1002, "wget");
  Key sh1 = proc_key(kHost1, 1003, "sh");
  Key wget2 = proc_key(kHost1, 1004, "wget");
  Key scp1 = proc_key(kHost1, 1005, "scp");
  Key sshd2 = proc_key(kHost2, 1101, "sshd");
  Key sshd1 = proc_key(kHost1, 1006, "sshd");

  ChainBuilder cb{gen, payload, kBase + 40 * kSecond};
  auto& t = cb.t;

  std::string scripted;  // first-stage script name per scenario
  if (scenario == "password_crack")
    scripted = "gather_password.sh";
  else if (scenario == "data_leakage")
    scripted = "leak_data.sh";
  else if (scenario == "vpn_filter")
    scripted = "vpn_filter.sh";
  else
    throw std::runtime_error("unknown scenario: " + scenario);

  Key f_stage1 = file_key(kHost1, "/tmp/" + scripted);

  // Shared first act on host1: shellshock payload over the attacker
  // connection, reverse shell, script download, transfer to host2.
  lib_reads(gen, infra[0], bash1, kHost1, t, payload);
  gen.burst(attacker_conn, bash1, "recvmsg", kHost1, cb.step(100, 200), 50 * kMilli, payload, 6,
            true);
  gen.emit(bash1, wget1, "clone", kHost1, cb.step(80, 150), t + 5 * kMilli, 0, true);
  lib_reads(gen, infra[0], wget1, kHost1, t, payload);
  gen.burst(srv_conn1, wget1, "recvmsg", kHost1, cb.step(100, 200), 80 * kMilli, payload, 8, true);
  gen.burst(wget1, f_stage1, "write", kHost1, cb.step(50, 120), 60 * kMilli, payload, 5, true);
  gen.emit(f_stage1, sh1, "execute", kHost1, cb.step(80, 160), t + 8 * kMilli, payload, true);
  lib_reads(gen, infra[0], sh1, kHost1, t, payload);

  Key f_tool_h1 = file_key(kHost1, scenario == "password_crack" ? "/tmp/crack_passwd.sh"
                           : scenario == "data_leakage"         ? "/tmp/leak_stage2.sh"
                                                                : "/tmp/vpnfilter.elf");
  gen.emit(sh1, wget2, "clone", kHost1, cb.step(60, 120), t + 4 * kMilli, 0, true);
  lib_reads(gen, infra[0], wget2, kHost1, t, payload);
  gen.burst(srv_conn2, wget2, "recvmsg", kHost1, cb.step(90, 180), 70 * kMilli, payload, 8, true);
  gen.burst(wget2, f_tool_h1, "write", kHost1, cb.step(60, 130), 60 * kMilli, payload, 6, true);
  gen.burst(f_tool_h1, scp1, "read", kHost1, cb.step(80, 150), 40 * kMilli, payload, 4, true);
  lib_reads(gen, infra[0], scp1, kHost1, t, payload);
  std::size_t transfer1_last = 0;
  {
    gen.burst(scp1, transfer1, "sendmsg", kHost1, cb.step(60, 120), 120 * kMilli, payload, 30,
              true);
    transfer1_last = gen.recs.size() - 1;
  }
  gen.burst(transfer1, sshd2, "recvmsg", kHost2, cb.step(40, 90), 120 * kMilli, payload, 30, true);
  lib_reads(gen, infra[1], sshd2, kHost2, t, payload);

  Key f_tool_h2 = file_key(kHost2, scenario == "password_crack" ? "/tmp/crack_passwd.sh"
                           : scenario == "data_leakage"         ? "/tmp/leak_stage2.sh"
                                                                : "/tmp/vpnfilter.elf");
  gen.burst(sshd2, f_tool_h2, "write", kHost2, cb.step(70, 140), 60 * kMilli, payload, 6, true);

  ScenarioPlan plan;
  plan.entry_keys = {attacker_conn.canon, srv_conn1.canon, srv_conn2.canon,
                     infra[0].repo_conn.canon, infra[1].repo_conn.canon};
  if (scenario != "data_leakage") plan.entry_keys.push_back(srv_conn3.canon);

  std::size_t poi1_rec = 0, poi2_rec = transfer1_last;

  if (scenario == "password_crack") {
    Key crack = proc_key(kHost2, 1102, "crack");
    Key wget3 = proc_key(kHost2, 1103, "wget");
    Key f_libfoo = file_key(kHost2, "/tmp/libfoo.so");
    Key f_pwtxt2 = file_key(kHost2, "/tmp/password_crack.txt");
    Key scp2 = proc_key(kHost2, 1104, "scp");
    Key f_pwtxt1 = file_key(kHost1, "/tmp/password_crack.txt");
    Key bzip = proc_key(kHost1, 1007, "bzip2");
    Key f_tar = file_key(kHost1, "/tmp/passwords.tar.bz2");

    gen.emit(f_tool_h2, crack, "execute", kHost2, cb.step(70, 150), t + 8 * kMilli, payload, true);
    lib_reads(gen, infra[1], crack, kHost2, t, payload);
    gen.emit(crack, wget3, "clone", kHost2, cb.step(50, 110), t + 4 * kMilli, 0, true);
    gen.burst(srv_conn3, wget3, "recvmsg", kHost2, cb.step(80, 160), 70 * kMilli, payload, 8, true);
    gen.burst(wget3, f_libfoo, "write", kHost2, cb.step(60, 120), 50 * kMilli, payload, 5, true);
    gen.burst(f_libfoo, crack, "read", kHost2, cb.step(60, 120), 30 * kMilli, payload, 4, true);
    gen.burst(infra[1].passwd, crack, "read", kHost2, cb.step(40, 90), 20 * kMilli, payload, 3,
              true);
    gen.burst(crack, f_pwtxt2, "write", kHost2, cb.step(90, 180), 60 * kMilli, payload, 6, true);
    gen.burst(f_pwtxt2, scp2, "read", kHost2, cb.step(60, 120), 40 * kMilli, payload, 4, true);
    lib_reads(gen, infra[1], scp2, kHost2, t, payload);
    gen.burst(scp2, transfer2, "sendmsg", kHost2, cb.step(60, 120), 120 * kMilli, payload, 30,
              true);
    poi2_rec = gen.recs.size() - 1;
    gen.burst(transfer2, sshd1, "recvmsg", kHost1, cb.step(40, 90), 120 * kMilli, payload, 30,
              true);
    lib_reads(gen, infra[0], sshd1, kHost1, t, payload);
    gen.burst(sshd1, f_pwtxt1, "write", kHost1, cb.step(70, 140), 60 * kMilli, payload, 6, true);
    gen.burst(f_pwtxt1, bzip, "read", kHost1, cb.step(60, 130), 40 * kMilli, payload, 4, true);
    lib_reads(gen, infra[0], bzip, kHost1, t, payload);
    gen.emit(bzip, f_tar, "write", kHost1, cb.step(100, 200), t + 60 * kMilli, payload, true);
    poi1_rec = gen.recs.size() - 1;

    plan.poi1_pattern_prefix = file_poi_pattern(kHost1, "/tmp/passwords.tar.bz2");
    plan.poi1_id_bound = false;
    plan.poi1_host = kHost1;
    plan.poi2_host = kHost2;
    plan.poi2_sip = kHost2Ip;
    plan.poi2_dip = kHost1Ip;
  } else if (scenario == "data_leakage") {
    Key leak = proc_key(kHost2, 1102, "leak");
    Key f_secret1 = file_key(kHost2, "/home/user/.ssh/id_rsa");
    Key f_secret2 = file_key(kHost2, "/home/user/finance.db");
    Key f_tar = file_key(kHost2, "/tmp/leaked.tar.bz2");
    Key tarp = proc_key(kHost2, 1103, "tar");
    Key exfil_conn = net_key(kHost2, kHost2Ip, 40100, kAttackerIp, 443);
    Key user1 = proc_key(kHost2, 1110, "editor");

    // Secrets written earlier by a benign editor that itself read libs.
    std::int64_t tearly = kBase + gen.uniform(5 * kSecond, 9 * kSecond);
    lib_reads(gen, infra[1], user1, kHost2, tearly, payload);
    gen.burst(user1, f_secret1, "write", kHost2, tearly + 300 * kMilli, 50 * kMilli,
              gen.noise_amount(payload), 3, false);
    gen.burst(user1, f_secret2, "write", kHost2, tearly + 600 * kMilli, 50 * kMilli,
              gen.noise_amount(payload), 4, false);

    gen.emit(f_tool_h2, leak, "execute", kHost2, cb.step(70, 150), t + 8 * kMilli, payload, true);
    lib_reads(gen, infra[1], leak, kHost2, t, payload);
    gen.burst(f_secret1, leak, "read", kHost2, cb.step(50, 110), 30 * kMilli, payload, 3, true);
    gen.burst(f_secret2, leak, "read", kHost2, cb.step(50, 110), 30 * kMilli, payload, 4, true);
    gen.emit(leak, tarp, "clone", kHost2, cb.step(50, 100), t + 4 * kMilli, 0, true);
    gen.burst(tarp, f_tar, "write", kHost2, cb.step(80, 160), 70 * kMilli, payload, 8, true);
    gen.burst(f_tar, leak, "read", kHost2, cb.step(60, 120), 40 * kMilli, payload, 4, true);
    gen.burst(leak, exfil_conn, "sendmsg", kHost2, cb.step(80, 150), 150 * kMilli, payload, 30,
              true);
    poi1_rec = gen.recs.size() - 1;

    plan.poi1_pattern_prefix = "";  // id-bound; path patched after sorting
    plan.poi1_id_bound = true;
    plan.poi1_host = kHost2;
    plan.poi2_host = kHost1;
    plan.poi2_sip = kHost1Ip;
    plan.poi2_dip = kHost2Ip;
  } else {  // vpn_filter
    Key vpnf = proc_key(kHost2, 1102, "vpnfilter");
    Key wget3 = proc_key(kHost2, 1103, "wget");
    Key f_bin = file_key(kHost2, "/tmp/vpnfilter_stage2");
    Key c2_conn = net_key(kHost2, kHost2Ip, 40200, kC2Ip, 8443);
    Key sh2 = proc_key(kHost2, 1105, "sh");

    gen.emit(f_tool_h2, sh2, "execute", kHost2, cb.step(70, 150), t + 8 * kMilli, payload, true);
    lib_reads(gen, infra[1], sh2, kHost2, t, payload);
    gen.emit(sh2, wget3, "clone", kHost2, cb.step(50, 110), t + 4 * kMilli, 0, true);
    gen.burst(srv_conn3, wget3, "recvmsg", kHost2, cb.step(80, 160), 70 * kMilli, payload, 8, true);
    gen.burst(wget3, f_bin, "write", kHost2, cb.step(60, 120), 50 * kMilli, payload, 6, true);
    gen.emit(f_bin, vpnf, "execute", kHost2, cb.step(60, 130), t + 8 * kMilli, payload, true);
    lib_reads(gen, infra[1], vpnf, kHost2, t, payload);
    gen.burst(vpnf, c2_conn, "sendmsg", kHost2, cb.step(80, 160), 200 * kMilli, payload, 30, true);
    poi1_rec = gen.recs.size() - 1;

    plan.poi1_pattern_prefix = "";  // id-bound
    plan.poi1_id_bound = true;
    plan.poi1_host = kHost2;
    plan.poi2_host = kHost1;
    plan.poi2_sip = kHost1Ip;
    plan.poi2_dip = kHost2Ip;
  }

  background_noise(gen, infra, scale, payload);

  // Id assignment follows event time, like a real audit stream.
  std::vector<std::size_t> order(gen.recs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (gen.recs[a].start != gen.recs[b].start) return gen.recs[a].start < gen.recs[b].start;
    return a < b;
  });
  std::uint64_t next_id = 1;
  for (std::size_t idx : order) gen.recs[idx].id = next_id++;

  const Rec& poi1 = gen.recs[poi1_rec];
  const Rec& poi2 = gen.recs[poi2_rec];
  std::int64_t cutoff1 = poi1.end + 1;
  std::int64_t cutoff2 = poi2.end + 1;

  std::string poi1_pattern = plan.poi1_pattern_prefix;
  if (plan.poi1_id_bound) {
    poi1_pattern = net_poi_pattern(poi1.id, plan.poi1_host,
                                   poi1.dst.at("src_ip").get<std::string>(),
                                   poi1.dst.at("dst_ip").get<std::string>());
  }
  std::string poi2_pattern =
      net_poi_pattern(poi2.id, plan.poi2_host, plan.poi2_sip, plan.poi2_dip);

  ScenarioOutput out;
  out.query = sub_query_text(poi1_pattern, "g1", "g2", cutoff1, 15) + "\nUNION\n(" +
              sub_query_text(poi2_pattern, "g3", "g4", cutoff2, 15) + ")\n";
  out.weight_query = weight_query_text(poi1_pattern) + "\n";

  std::ostringstream log;
  std::vector<std::uint64_t> critical_ids;
  for (std::size_t idx : order) {
    const Rec& r = gen.recs[idx];
    json j;
    j["type"] = "event";
    j["id"] = r.id;
    j["op"] = r.op;
    j["src"] = r.src;
    j["dst"] = r.dst;
    j["start"] = r.start;
    j["end"] = r.end;
    j["amount"] = r.amount;
    j["host"] = r.host;
    log << j.dump() << "\n";
    if (r.critical) critical_ids.push_back(r.id);
  }
  std::sort(critical_ids.begin(), critical_ids.end());
  out.jsonl = log.str();

  json manifest;
  manifest["scenario"] = scenario;
  manifest["seed"] = seed;
  manifest["scale"] = scale;
  manifest["entity_count"] = gen.keys.size();
  manifest["event_count"] = gen.recs.size();
  manifest["critical_event_ids"] = critical_ids;
  manifest["entry_keys"] = plan.entry_keys;
  manifest["poi"] = {{"event_id", poi1.id}, {"host", plan.poi1_host}};
  manifest["poi2"] = {{"event_id", poi2.id}, {"host", plan.poi2_host}};
  manifest["forward_cutoffs"] = {cutoff1, cutoff2};
  out.manifest_json = manifest.dump(2);
  return out;
}

std::vector<std::string> scenario_names() {
  return {"password_crack", "data_leakage", "vpn_filter"};
}

}  // namespace provql
