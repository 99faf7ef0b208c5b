#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "provql/json_io.hpp"
#include "provql/store.hpp"

namespace provql {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHeaderSize = 14;  // magic(4) + version u16 + count u64

void put_u16(std::string& b, std::uint16_t v) {
  b.push_back(static_cast<char>(v & 0xff));
  b.push_back(static_cast<char>((v >> 8) & 0xff));
}
void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint16_t get_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}
std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void encode_record(std::string& b, const Event& e, std::uint32_t host_off) {
  put_u64(b, e.id);
  put_u64(b, e.src);
  put_u64(b, e.dst);
  b.push_back(static_cast<char>(e.optype));
  put_u64(b, static_cast<std::uint64_t>(e.starttime));
  put_u64(b, static_cast<std::uint64_t>(e.endtime));
  put_u64(b, e.amount);
  put_u32(b, host_off);
}

struct RawRecord {
  Event event;  // host_id left empty; resolve via the host table
  std::uint32_t host_off = 0;
};

RawRecord decode_record(const unsigned char* p) {
  RawRecord r;
  r.event.id = get_u64(p);
  r.event.src = get_u64(p + 8);
  r.event.dst = get_u64(p + 16);
  r.event.optype = static_cast<OpType>(p[24]);
  r.event.starttime = static_cast<TimestampNs>(get_u64(p + 25));
  r.event.endtime = static_cast<TimestampNs>(get_u64(p + 33));
  r.event.amount = get_u64(p + 41);
  r.host_off = get_u32(p + 49);
  return r;
}

bool dst_order(const Event& a, const Event& b) {
  if (a.dst != b.dst) return a.dst < b.dst;
  if (a.starttime != b.starttime) return a.starttime < b.starttime;
  return a.id < b.id;
}

bool src_order(const Event& a, const Event& b) {
  if (a.src != b.src) return a.src < b.src;
  if (a.endtime != b.endtime) return a.endtime > b.endtime;
  return a.id < b.id;
}

}  // namespace

FileStore::FileStore(const std::string& dir) : dir_(dir) {
  fs::create_directories(dir_);
  load();
}

FileStore::~FileStore() {
  if (by_dst_) std::fclose(by_dst_);
  if (by_src_) std::fclose(by_src_);
}

void FileStore::reopen_readers() {
  if (by_dst_) std::fclose(by_dst_);
  if (by_src_) std::fclose(by_src_);
  by_dst_ = std::fopen((dir_ + "/events_by_dst.pvqs").c_str(), "rb");
  by_src_ = std::fopen((dir_ + "/events_by_src.pvqs").c_str(), "rb");
}

void FileStore::load() {
  std::ifstream ents(dir_ + "/entities.jsonl");
  if (ents) {
    std::string line;
    while (std::getline(ents, line)) {
      if (line.empty()) continue;
      Entity e = entity_from_json(nlohmann::json::parse(line));
      entities_.intern(e.key, e.attrs);
    }
  }

  reopen_readers();
  record_count_ = 0;
  dst_dir_.clear();
  src_dir_.clear();
  id_dir_.clear();
  host_table_.clear();
  host_offsets_.clear();
  if (!by_dst_ || !by_src_) return;

  // One sequential scan per file builds the sparse per-node directories and
  // the event-id index; only offsets are retained, never event payloads.
  auto scan = [&](std::FILE* f, bool load_hosts, auto&& on_record) -> std::uint64_t {
    unsigned char header[kHeaderSize];
    if (std::fread(header, 1, kHeaderSize, f) != kHeaderSize) return 0;
    if (std::memcmp(header, "PVQS", 4) != 0) throw std::runtime_error("bad store magic");
    if (get_u16(header + 4) != kFormatVersion) throw std::runtime_error("bad store version");
    std::uint64_t count = get_u64(header + 6);
    std::vector<unsigned char> buf(kRecordSize);
    for (std::uint64_t i = 0; i < count; ++i) {
      if (std::fread(buf.data(), 1, kRecordSize, f) != kRecordSize)
        throw std::runtime_error("truncated store file");
      on_record(i, decode_record(buf.data()));
    }
    if (load_hosts) {
      unsigned char szbuf[4];
      if (std::fread(szbuf, 1, 4, f) == 4) {
        std::uint32_t sz = get_u32(szbuf);
        std::string blob(sz, '\0');
        if (sz && std::fread(blob.data(), 1, sz, f) != sz)
          throw std::runtime_error("truncated host table");
        std::size_t pos = 0;
        while (pos < blob.size()) {
          std::string s = blob.c_str() + pos;
          host_offsets_[s] = static_cast<std::uint32_t>(pos);
          host_table_.push_back(s);
          pos += s.size() + 1;
        }
      }
    }
    return count;
  };

  record_count_ = scan(by_dst_, true, [&](std::uint64_t i, const RawRecord& r) {
    auto [it, fresh] = dst_dir_.try_emplace(r.event.dst, Range{i, 0});
    (void)fresh;
    it->second.count++;
    id_dir_[r.event.id] = i;
  });
  std::uint64_t n2 = scan(by_src_, false, [&](std::uint64_t i, const RawRecord& r) {
    auto [it, fresh] = src_dir_.try_emplace(r.event.src, Range{i, 0});
    (void)fresh;
    it->second.count++;
  });
  if (n2 != record_count_) throw std::runtime_error("store files disagree on record count");
}

ImportStats FileStore::insert_batch(const std::vector<Entity>& entities,
                                    const std::vector<Event>& events) {
  ImportStats stats;
  for (const auto& ent : entities) {
    auto key_problems = ent.key.validate();
    if (!key_problems.empty()) {
      stats.rejected++;
      stats.rejection_reasons.push_back("entity: " + key_problems.front());
      continue;
    }
    auto [id, fresh] = entities_.intern(ent.key, ent.attrs);
    (void)id;
    fresh ? stats.new_entities++ : stats.merged_entities++;
  }
  std::unordered_set<EntityId> known;
  for (EntityId i = 0; i < entities_.size(); ++i) known.insert(i);

  std::vector<Event> accepted;
  std::unordered_set<EventId> batch_ids;
  for (const auto& ev : events) {
    auto violations = validate_event(ev, known);
    if (id_dir_.count(ev.id) || batch_ids.count(ev.id)) violations.push_back("duplicate event id");
    if (!violations.empty()) {
      stats.rejected++;
      std::string r = "event " + std::to_string(ev.id) + ":";
      for (const auto& v : violations) r += " " + v;
      stats.rejection_reasons.push_back(r);
      continue;
    }
    batch_ids.insert(ev.id);
    accepted.push_back(ev);
  }

  // Extend the host table; existing offsets stay valid because the blob
  // only ever grows at the end.
  for (const auto& ev : accepted) {
    if (!host_offsets_.count(ev.host_id)) {
      std::uint32_t off = 0;
      for (const auto& h : host_table_) off += static_cast<std::uint32_t>(h.size()) + 1;
      host_offsets_[ev.host_id] = off;
      host_table_.push_back(ev.host_id);
    }
  }
  std::string host_blob;
  for (const auto& h : host_table_) {
    host_blob += h;
    host_blob.push_back('\0');
  }

  // Merge-sort the batch into each record file: stream existing records,
  // interleave the sorted batch, write a temp file, then rename. The renames
  // are the commit point, so an I/O failure leaves the files as they were.
  std::uint64_t new_count = record_count_ + accepted.size();
  auto merge_into = [&](std::FILE* existing, std::vector<Event> batch, auto less,
                        const std::string& out_path, auto&& on_record) {
    std::sort(batch.begin(), batch.end(), less);
    std::FILE* out = std::fopen((out_path + ".tmp").c_str(), "wb");
    if (!out) throw std::runtime_error("cannot write " + out_path);
    auto fail = [&](const std::string& what) {
      std::fclose(out);
      fs::remove(out_path + ".tmp");
      throw std::runtime_error(what + " " + out_path);
    };
    auto write_all = [&](const std::string& bytes) {
      if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), out) != bytes.size())
        fail("short write to");
    };
    std::string header;
    header.append("PVQS");
    put_u16(header, kFormatVersion);
    put_u64(header, new_count);
    write_all(header);

    std::uint64_t existing_left = record_count_;
    std::vector<unsigned char> buf(kRecordSize);
    bool have_old = false;
    Event old_ev;
    if (existing) std::fseek(existing, kHeaderSize, SEEK_SET);
    auto pull_old = [&]() {
      if (!existing || existing_left == 0) {
        have_old = false;
        return;
      }
      if (std::fread(buf.data(), 1, kRecordSize, existing) != kRecordSize)
        fail("truncated input while merging");
      auto r = decode_record(buf.data());
      old_ev = r.event;
      old_ev.host_id = r.host_off < host_blob.size() ? host_blob.c_str() + r.host_off : "";
      existing_left--;
      have_old = true;
    };
    pull_old();
    std::size_t bi = 0;
    std::uint64_t index = 0;
    std::string rec;
    while (have_old || bi < batch.size()) {
      bool from_old = have_old && (bi >= batch.size() || less(old_ev, batch[bi]));
      const Event& next = from_old ? old_ev : batch[bi];
      rec.clear();
      encode_record(rec, next, host_offsets_.at(next.host_id));
      write_all(rec);
      on_record(index++, next);
      if (from_old)
        pull_old();
      else
        bi++;
    }
    std::string table;
    put_u32(table, static_cast<std::uint32_t>(host_blob.size()));
    table += host_blob;
    write_all(table);
    if (std::fclose(out) != 0) throw std::runtime_error("close failed for " + out_path);
    fs::rename(out_path + ".tmp", out_path);
  };

  decltype(dst_dir_) new_dst_dir;
  decltype(src_dir_) new_src_dir;
  decltype(id_dir_) new_id_dir;
  merge_into(by_dst_, accepted, dst_order, dir_ + "/events_by_dst.pvqs",
             [&](std::uint64_t i, const Event& e) {
               auto [it, fresh] = new_dst_dir.try_emplace(e.dst, Range{i, 0});
               (void)fresh;
               it->second.count++;
               new_id_dir[e.id] = i;
             });
  merge_into(by_src_, accepted, src_order, dir_ + "/events_by_src.pvqs",
             [&](std::uint64_t i, const Event& e) {
               auto [it, fresh] = new_src_dir.try_emplace(e.src, Range{i, 0});
               (void)fresh;
               it->second.count++;
             });

  {
    std::ofstream out(dir_ + "/entities.jsonl.tmp");
    for (const auto& e : entities_.all()) out << entity_to_json(e).dump() << "\n";
    if (!out) throw std::runtime_error("cannot write entities.jsonl");
    out.close();
    fs::rename(dir_ + "/entities.jsonl.tmp", dir_ + "/entities.jsonl");
  }

  dst_dir_ = std::move(new_dst_dir);
  src_dir_ = std::move(new_src_dir);
  id_dir_ = std::move(new_id_dir);
  record_count_ = new_count;
  stats.accepted = accepted.size();
  reopen_readers();
  return stats;
}

Event FileStore::read_record(std::FILE* f, std::uint64_t index) const {
  std::fseek(f, static_cast<long>(kHeaderSize + index * kRecordSize), SEEK_SET);
  unsigned char buf[kRecordSize];
  if (std::fread(buf, 1, kRecordSize, f) != kRecordSize)
    throw std::runtime_error("record read out of range");
  auto r = decode_record(buf);
  Event e = r.event;
  for (const auto& [h, off] : host_offsets_) {
    if (off == r.host_off) {
      e.host_id = h;
      break;
    }
  }
  return e;
}

std::vector<Event> FileStore::read_block(std::FILE* f, const Range& r) const {
  std::vector<Event> out;
  if (!f || r.count == 0) return out;
  std::fseek(f, static_cast<long>(kHeaderSize + r.first * kRecordSize), SEEK_SET);
  std::vector<unsigned char> buf(r.count * kRecordSize);
  if (std::fread(buf.data(), 1, buf.size(), f) != buf.size())
    throw std::runtime_error("block read out of range");
  out.reserve(r.count);
  for (std::uint64_t i = 0; i < r.count; ++i) {
    auto rec = decode_record(buf.data() + i * kRecordSize);
    Event e = rec.event;
    for (const auto& [h, off] : host_offsets_) {
      if (off == rec.host_off) {
        e.host_id = h;
        break;
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<Event> FileStore::incoming(EntityId v, const TimePredicate& p) const {
  auto it = dst_dir_.find(v);
  if (it == dst_dir_.end()) return {};
  const Range whole = it->second;

  // Bisect on the sort key (starttime asc) so only the qualifying span of
  // the node's block is read.
  auto start_at = [&](std::uint64_t i) {
    std::fseek(by_dst_, static_cast<long>(kHeaderSize + i * kRecordSize + 25), SEEK_SET);
    unsigned char b[8];
    if (std::fread(b, 1, 8, by_dst_) != 8) throw std::runtime_error("record read out of range");
    return static_cast<TimestampNs>(get_u64(b));
  };
  auto lower = [&](TimestampNs t) {  // first index in block with starttime >= t
    std::uint64_t lo = whole.first, hi = whole.first + whole.count;
    while (lo < hi) {
      std::uint64_t mid = lo + (hi - lo) / 2;
      if (start_at(mid) < t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  };

  Range span = whole;
  if (p.kind == TimePredicate::Kind::StartBefore) {
    std::uint64_t hi = lower(p.t1);
    span = Range{whole.first, hi - whole.first};
  } else if (p.kind == TimePredicate::Kind::Window) {
    std::uint64_t lo = lower(p.t1), hi = lower(p.t2);
    span = Range{lo, hi - lo};
  }
  auto block = read_block(by_dst_, span);
  std::vector<Event> out;
  for (const auto& e : block)
    if (event_matches(e, p, true)) out.push_back(e);
  count_fetch(out.size());
  return out;
}

std::vector<Event> FileStore::outgoing(EntityId u, const TimePredicate& p) const {
  auto it = src_dir_.find(u);
  if (it == src_dir_.end()) return {};
  const Range whole = it->second;

  auto end_at = [&](std::uint64_t i) {
    std::fseek(by_src_, static_cast<long>(kHeaderSize + i * kRecordSize + 33), SEEK_SET);
    unsigned char b[8];
    if (std::fread(b, 1, 8, by_src_) != 8) throw std::runtime_error("record read out of range");
    return static_cast<TimestampNs>(get_u64(b));
  };
  auto first_leq = [&](TimestampNs t) {  // first index with endtime <= t (desc order)
    std::uint64_t lo = whole.first, hi = whole.first + whole.count;
    while (lo < hi) {
      std::uint64_t mid = lo + (hi - lo) / 2;
      if (end_at(mid) > t)
        lo = mid + 1;
      else
        hi = mid;
    }
    return lo;
  };

  Range span = whole;
  if (p.kind == TimePredicate::Kind::EndAfter) {
    std::uint64_t hi = first_leq(p.t1);
    span = Range{whole.first, hi - whole.first};
  } else if (p.kind == TimePredicate::Kind::Window) {
    std::uint64_t lo = first_leq(p.t2), hi = first_leq(p.t1);
    span = Range{lo, hi - lo};
  }
  auto block = read_block(by_src_, span);
  std::vector<Event> out;
  for (const auto& e : block)
    if (event_matches(e, p, false)) out.push_back(e);
  count_fetch(out.size());
  return out;
}

std::vector<Event> FileStore::find_events(const EventPattern& pattern) const {
  std::vector<Event> out;
  auto full_match = [&](const Event& e) {
    if (pattern.id && e.id != *pattern.id) return false;
    if (pattern.optype && e.optype != *pattern.optype) return false;
    if (pattern.host_id && e.host_id != *pattern.host_id) return false;
    if (!pattern.src.empty()) {
      auto ent = entities_.by_id(e.src);
      if (!ent || !endpoint_matches(*ent, pattern.src)) return false;
    }
    if (!pattern.dst.empty()) {
      auto ent = entities_.by_id(e.dst);
      if (!ent || !endpoint_matches(*ent, pattern.dst)) return false;
    }
    return true;
  };

  if (pattern.id) {
    auto it = id_dir_.find(*pattern.id);
    if (it != id_dir_.end()) {
      Event e = read_record(by_dst_, it->second);
      if (full_match(e)) out.push_back(e);
    }
  } else if (!pattern.dst.empty()) {
    for (EntityId v : entities_.find(pattern.dst)) {
      auto it = dst_dir_.find(v);
      if (it == dst_dir_.end()) continue;
      for (const auto& e : read_block(by_dst_, it->second))
        if (full_match(e)) out.push_back(e);
    }
  } else if (!pattern.src.empty()) {
    for (EntityId u : entities_.find(pattern.src)) {
      auto it = src_dir_.find(u);
      if (it == src_dir_.end()) continue;
      for (const auto& e : read_block(by_src_, it->second))
        if (full_match(e)) out.push_back(e);
    }
  } else {
    for (const auto& e : audit_all_events())
      if (full_match(e)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.id < b.id; });
  count_fetch(out.size());
  return out;
}

std::optional<Entity> FileStore::entity_by_id(EntityId id) const { return entities_.by_id(id); }

std::optional<EntityId> FileStore::entity_id_by_key(const EntityKey& key) const {
  return entities_.id_by_key(key);
}

std::vector<Entity> FileStore::all_entities() const { return entities_.all(); }

std::vector<Event> FileStore::audit_all_events() const {
  std::vector<Event> out;
  if (!by_dst_ || record_count_ == 0) return out;
  out = read_block(by_dst_, Range{0, record_count_});
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.id < b.id; });
  return out;
}

}  // namespace provql
