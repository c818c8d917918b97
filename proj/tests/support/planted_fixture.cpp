#include "planted_fixture.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "provhunt/event_ingest.hpp"

namespace provhunt::fixture {

namespace fs = std::filesystem;

namespace {

using K = EntityKind;
using E = EventType;

const std::vector<std::string> kProcessNames = {
    "/lib/systemd/systemd", "/usr/sbin/sshd",   "/bin/bash",         "/usr/sbin/cron",
    "/usr/bin/python3",     "/usr/bin/vim",     "/usr/sbin/nginx",   "/usr/lib/firefox/firefox",
    "/usr/bin/ssh",         "/usr/sbin/rsyslogd",
};

const std::vector<std::string> kFileNames = {
    "/etc/passwd",
    "/etc/hostname",
    "/var/log/syslog",
    "/var/log/auth.log",
    "/usr/lib/x86_64-linux-gnu/libc.so.6",
    "/home/admin/.bashrc",
    "/etc/nginx/nginx.conf",
    "/var/www/html/index.html",
    "/var/log/nginx/access.log",
    "/tmp/firefox-cache.sqlite",
    "/home/admin/.mozilla/firefox/places.sqlite",
    "/etc/crontab",
    "/usr/lib/python3/dist-packages/apt.py",
    "/etc/ssh/sshd_config",
    "/home/admin/.ssh/known_hosts",
    "/etc/resolv.conf",
    "/usr/share/zoneinfo/UTC",
    "/var/lib/dpkg/status",
};

const std::vector<std::string> kSocketNames = {
    "10.0.0.5:22->10.0.0.9:51515",      "10.0.0.5:80->10.0.0.21:40112",
    "10.0.0.5:80->10.0.0.22:40113",     "10.0.0.5:443->10.0.0.23:40114",
    "10.0.0.5:40200->93.184.216.34:443", "10.0.0.5:40201->151.101.1.69:443",
    "10.0.0.5:53124->10.0.0.1:53",      "10.0.0.5:514->10.0.0.2:514",
    "10.0.0.5:40300->140.82.114.4:22",  "10.0.0.5:80->10.0.0.24:40115",
    "10.0.0.5:80->10.0.0.25:40116",     "10.0.0.5:40202->104.16.0.1:443",
};

/// One host's benign entities under a uuid prefix.
struct Host {
  std::vector<Entity> procs;
  std::vector<Entity> files;
  std::vector<Entity> socks;

  explicit Host(const std::string& prefix) {
    for (std::size_t i = 0; i < kProcessNames.size(); ++i)
      procs.push_back({fmt::format("{}-p{:02}", prefix, i), K::Process, kProcessNames[i]});
    for (std::size_t i = 0; i < kFileNames.size(); ++i)
      files.push_back({fmt::format("{}-f{:02}", prefix, i), K::File, kFileNames[i]});
    for (std::size_t i = 0; i < kSocketNames.size(); ++i)
      socks.push_back({fmt::format("{}-s{:02}", prefix, i), K::Socket, kSocketNames[i]});
  }

  const Entity& proc(std::string_view name) const { return by_name(procs, name); }
  const Entity& file(std::string_view name) const { return by_name(files, name); }

 private:
  static const Entity& by_name(const std::vector<Entity>& list, std::string_view name) {
    return *std::find_if(list.begin(), list.end(), [&](const Entity& e) { return e.name == name; });
  }
};

/// Which processes talk to which sockets and touch which files.
struct Habit {
  std::string process;
  std::vector<std::size_t> sockets;
  std::vector<std::string> reads;
  std::vector<std::string> writes;
};

const std::vector<Habit>& habits() {
  static const std::vector<Habit> h = {
      {"/usr/sbin/sshd", {0}, {"/etc/ssh/sshd_config", "/etc/passwd", "/usr/lib/x86_64-linux-gnu/libc.so.6"}, {"/var/log/auth.log"}},
      {"/usr/sbin/nginx", {1, 2, 3, 9, 10}, {"/etc/nginx/nginx.conf", "/var/www/html/index.html", "/usr/lib/x86_64-linux-gnu/libc.so.6"}, {"/var/log/nginx/access.log"}},
      {"/usr/lib/firefox/firefox", {4, 5, 11}, {"/home/admin/.mozilla/firefox/places.sqlite", "/etc/resolv.conf", "/usr/lib/x86_64-linux-gnu/libc.so.6", "/etc/hostname"}, {"/tmp/firefox-cache.sqlite", "/home/admin/.mozilla/firefox/places.sqlite"}},
      {"/usr/bin/python3", {6}, {"/usr/lib/python3/dist-packages/apt.py", "/var/lib/dpkg/status", "/etc/resolv.conf"}, {"/var/lib/dpkg/status"}},
      {"/usr/sbin/rsyslogd", {7}, {"/usr/share/zoneinfo/UTC"}, {"/var/log/syslog"}},
      {"/usr/bin/ssh", {8}, {"/home/admin/.ssh/known_hosts", "/etc/passwd"}, {"/home/admin/.ssh/known_hosts"}},
      {"/bin/bash", {}, {"/home/admin/.bashrc", "/etc/passwd", "/etc/hostname", "/usr/lib/x86_64-linux-gnu/libc.so.6"}, {"/home/admin/.bashrc"}},
      {"/usr/sbin/cron", {}, {"/etc/crontab", "/etc/passwd"}, {"/var/log/syslog"}},
      {"/usr/bin/vim", {}, {"/home/admin/.bashrc", "/usr/lib/x86_64-linux-gnu/libc.so.6"}, {"/home/admin/.bashrc"}},
  };
  return h;
}

/// Process tree, then `rounds` of background activity: socket ping-pong
/// plus file reads and writes, at t in [t0, t0 + span).
void benign_activity(const Host& h, std::mt19937_64& rng, Timestamp t0, Timestamp span,
                     std::size_t rounds, std::vector<RawEvent>& out) {
  const auto& systemd = h.proc("/lib/systemd/systemd");
  Timestamp t = t0;
  for (const char* child : {"/usr/sbin/sshd", "/usr/sbin/cron", "/usr/sbin/nginx", "/usr/sbin/rsyslogd"})
    out.push_back({systemd, h.proc(child), E::Fork, t++});
  out.push_back({h.proc("/usr/sbin/sshd"), h.proc("/bin/bash"), E::Fork, t++});
  for (const char* child : {"/usr/bin/vim", "/usr/bin/python3", "/usr/lib/firefox/firefox", "/usr/bin/ssh"})
    out.push_back({h.proc("/bin/bash"), h.proc(child), E::Fork, t++});
  for (const char* binary : {"/usr/lib/x86_64-linux-gnu/libc.so.6"})
    out.push_back({h.file(binary), h.proc("/bin/bash"), E::Mmap, t++});

  std::uniform_int_distribution<Timestamp> when(t, t0 + span - 1);
  std::vector<Timestamp> times(rounds);
  for (auto& x : times) x = when(rng);
  std::sort(times.begin(), times.end());

  for (Timestamp at : times) {
    const auto& habit = habits()[rng() % habits().size()];
    const auto& p = h.proc(habit.process);
    const auto choice = rng() % 4;
    if (choice < 2 && !habit.sockets.empty()) {
      const auto& s = h.socks[habit.sockets[rng() % habit.sockets.size()]];
      out.push_back({s, p, E::Receive, at});
      out.push_back({p, s, E::Send, at});
    } else if (choice < 3) {
      out.push_back({h.file(habit.reads[rng() % habit.reads.size()]), p, E::Read, at});
    } else {
      out.push_back({p, h.file(habit.writes[rng() % habit.writes.size()]), E::Write, at});
    }
  }
}

void sort_by_time(std::vector<RawEvent>& events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const RawEvent& a, const RawEvent& b) { return a.t < b.t; });
}

}  // namespace

Planted make_planted(std::uint64_t seed) {
  Planted p;
  std::mt19937_64 rng(seed);

  // Attack-free history for the knowledge base.
  {
    const Host train("train");
    benign_activity(train, rng, 0, 100'000, 3000, p.benign_training);
    sort_by_time(p.benign_training);
  }

  const Host h("host");
  benign_activity(h, rng, 0, 10'000, 2200, p.events);

  // The intrusion: a fresh browser instance is exploited over the network,
  // drops two payloads and runs them; the second beacons to its C2 server.
  const Entity exploit{"atk-sock-exploit", K::Socket, "10.0.0.5:40500->146.153.68.151:80"};
  const Entity browser{"atk-proc-firefox", K::Process, "/usr/lib/firefox/firefox"};
  const Entity clean_f{"atk-file-clean", K::File, "/home/admin/clean"};
  const Entity profile_f{"atk-file-profile", K::File, "/home/admin/profile"};
  const Entity clean_p{"atk-proc-clean", K::Process, "/home/admin/clean"};
  const Entity profile_p{"atk-proc-profile", K::Process, "/home/admin/profile"};
  const Entity c2{"atk-sock-c2", K::Socket, "10.0.0.5:50000->146.153.68.151:443"};
  const Entity glx{"atk-file-glx", K::File, "/dev/glx_alsa_679"};
  const Entity& passwd = h.file("/etc/passwd");
  const Entity& hostname = h.file("/etc/hostname");

  const std::vector<RawEvent> attack = {
      {exploit, browser, E::Receive, 5000},
      {browser, clean_f, E::Write, 5100},
      {browser, profile_f, E::Write, 5150},
      {browser, clean_p, E::Fork, 5200},
      {clean_p, clean_f, E::Execute, 5300},
      {passwd, clean_p, E::Read, 5350},
      {clean_p, profile_p, E::Fork, 5400},
      {hostname, profile_p, E::Read, 5420},
      {profile_p, profile_f, E::Execute, 5450},
      {profile_p, c2, E::Send, 5500},
      {c2, profile_p, E::Receive, 5550},
      {profile_p, glx, E::Write, 5600},
      {profile_p, c2, E::Send, 5700},
      {c2, profile_p, E::Receive, 5750},
  };
  p.events.insert(p.events.end(), attack.begin(), attack.end());
  for (const auto* e : {&exploit, &browser, &clean_f, &profile_f, &clean_p, &profile_p, &c2, &glx,
                        &passwd, &hostname})
    p.truth.insert(e->uuid);

  // Decoys: names the knowledge base has never seen, doing ordinary things.
  const Entity notes{"decoy-file-notes", K::File, "/home/admin/notes_draft.txt"};
  const Entity tool{"decoy-proc-tool", K::Process, "/opt/newtool/bin/newtool"};
  const Entity archive{"decoy-file-archive", K::File, "/srv/backup/archive_0042.tar"};
  const Entity thumb{"decoy-file-thumb", K::File, "/home/admin/.cache/thumbnails/x1.png"};
  const Entity object{"decoy-file-object", K::File, "/var/tmp/build_artifact.o"};
  const std::vector<RawEvent> decoys = {
      {h.proc("/usr/bin/vim"), notes, E::Write, 3000},
      {notes, h.proc("/usr/bin/vim"), E::Read, 3010},
      {h.proc("/bin/bash"), tool, E::Fork, 3100},
      {h.file("/var/log/syslog"), tool, E::Read, 3110},
      {tool, archive, E::Write, 3120},
      {h.proc("/usr/lib/firefox/firefox"), thumb, E::Write, 3200},
      {h.proc("/usr/bin/python3"), object, E::Write, 3300},
  };
  p.events.insert(p.events.end(), decoys.begin(), decoys.end());
  for (const auto* e : {&notes, &tool, &archive, &thumb, &object}) p.decoys.insert(e->uuid);
  sort_by_time(p.events);

  p.iocs = {"146.153.68.151", "/home/admin/clean", "/home/admin/profile", "glx_alsa"};
  p.asg_lines = {
      "apt-report-1\t146.153.68.151 receive firefox write /home/admin/clean",
      "apt-report-1\t/home/admin/clean fork /home/admin/profile send 146.153.68.151",
      "apt-report-2\t/etc/passwd read /home/admin/clean",
      "apt-report-3\t/home/admin/profile write /dev/glx_alsa_679",
      "apt-report-4\tbash download /tmp/dropper execute /tmp/dropper connect 185.220.101.4",
  };
  return p;
}

PlantedFiles write_planted(const Planted& p, const std::string& dir) {
  fs::create_directories(dir);
  PlantedFiles f;
  auto base = [&](const char* name) { return (fs::path(dir) / name).string(); };
  auto write_lines = [](const std::string& path, const auto& lines, auto&& render) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& l : lines) out << render(l) << '\n';
  };
  auto same = [](const std::string& s) { return s; };
  f.events = base("host.jsonl");
  f.benign = base("benign.jsonl");
  f.truth = base("truth.txt");
  f.iocs = base("iocs.txt");
  f.asg = base("cti.tsv");
  write_lines(f.events, p.events, [](const RawEvent& e) { return serialize_event(e); });
  write_lines(f.benign, p.benign_training, [](const RawEvent& e) { return serialize_event(e); });
  write_lines(f.truth, p.truth, same);
  write_lines(f.iocs, p.iocs, same);
  write_lines(f.asg, p.asg_lines, same);
  return f;
}

std::string scratch_dir(const std::string& tag) {
  static std::random_device rd;
  const auto dir = fs::temp_directory_path() / fmt::format("provhunt-{}-{:x}", tag, rd());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

}  // namespace provhunt::fixture
