#include "tabdiff/checkpoint.hpp"

#include "tabdiff/hash.hpp"

#include <json.hpp>

#include <cstring>
#include <fstream>

namespace tabdiff {

using nlohmann::json;

namespace {

Eigen::Index shape_product(const std::vector<int>& shape) {
  Eigen::Index p = 1;
  for (int d : shape) p *= d;
  return p;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  if (ckpt.dtype != "f32" && ckpt.dtype != "f64")
    throw DataError("unknown checkpoint dtype '" + ckpt.dtype + "'");
  const size_t scalar_bytes = ckpt.dtype == "f32" ? 4 : 8;

  json header;
  header["version"] = kVersion;
  header["dtype"] = ckpt.dtype;
  header["grid_height"] = ckpt.grid_height;
  header["grid_width"] = ckpt.grid_width;
  header["base_channels"] = ckpt.base_channels;
  header["time_dim"] = ckpt.time_dim;
  json sched;
  sched["T"] = ckpt.schedule.T;
  sched["beta"] = std::vector<double>(ckpt.schedule.beta.data(),
                                      ckpt.schedule.beta.data() + ckpt.schedule.beta.size());
  header["schedule"] = std::move(sched);
  header["codec"] = json::parse(ckpt.codec_json);
  header["layout"] = json::parse(ckpt.layout_json);
  header["codec_fingerprint"] = hex64(ckpt.codec_fingerprint);
  header["layout_fingerprint"] = hex64(ckpt.layout_fingerprint);
  header["config_echo"] = json::parse(ckpt.config_echo.empty() ? "{}" : ckpt.config_echo);

  json tensors = json::array();
  uint64_t offset = 0;
  for (const auto& blob : ckpt.tensors) {
    if (shape_product(blob.shape) != static_cast<Eigen::Index>(blob.data.size()))
      throw DataError("tensor '" + blob.name + "' shape does not match its data size");
    const uint64_t bytes = blob.data.size() * scalar_bytes;
    tensors.push_back(
        {{"name", blob.name}, {"shape", blob.shape}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  header["tensors"] = std::move(tensors);

  const std::string header_text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open checkpoint for writing: " + path);
  out.write(kCheckpointMagic, static_cast<std::streamsize>(std::strlen(kCheckpointMagic)));
  const uint64_t header_len = header_text.size();
  char lenbuf[8];
  for (int i = 0; i < 8; ++i) lenbuf[i] = static_cast<char>((header_len >> (8 * i)) & 0xff);
  out.write(lenbuf, 8);
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  for (const auto& blob : ckpt.tensors) {
    if (ckpt.dtype == "f32") {
      std::vector<float> narrow(blob.data.size());
      for (size_t i = 0; i < blob.data.size(); ++i) narrow[i] = static_cast<float>(blob.data[i]);
      out.write(reinterpret_cast<const char*>(narrow.data()),
                static_cast<std::streamsize>(narrow.size() * 4));
    } else {
      out.write(reinterpret_cast<const char*>(blob.data.data()),
                static_cast<std::streamsize>(blob.data.size() * 8));
    }
  }
  if (!out) throw DataError("short write to checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  const size_t magic_len = std::strlen(kCheckpointMagic);
  std::string magic(magic_len, '\0');
  in.read(magic.data(), static_cast<std::streamsize>(magic_len));
  if (!in || magic != kCheckpointMagic)
    throw DataError("not a checkpoint file (bad magic): " + path);

  char lenbuf[8];
  in.read(lenbuf, 8);
  if (!in) throw DataError("truncated checkpoint header length");
  uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i)
    header_len |= static_cast<uint64_t>(static_cast<unsigned char>(lenbuf[i])) << (8 * i);
  if (header_len > (1ull << 30)) throw DataError("implausible checkpoint header length");

  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw DataError("truncated checkpoint header");

  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Checkpoint ckpt;
  try {
    ckpt.dtype = header.at("dtype").get<std::string>();
    if (ckpt.dtype != "f32" && ckpt.dtype != "f64")
      throw DataError("unknown checkpoint dtype '" + ckpt.dtype + "'");
    ckpt.grid_height = header.at("grid_height").get<int>();
    ckpt.grid_width = header.at("grid_width").get<int>();
    ckpt.base_channels = header.at("base_channels").get<int>();
    ckpt.time_dim = header.at("time_dim").get<int>();

    const auto& sched = header.at("schedule");
    const int T = sched.at("T").get<int>();
    const auto beta = sched.at("beta").get<std::vector<double>>();
    if (static_cast<int>(beta.size()) != T) throw DataError("schedule beta length != T");
    ckpt.schedule.T = T;
    ckpt.schedule.beta.resize(T);
    ckpt.schedule.alpha.resize(T);
    ckpt.schedule.alphabar.resize(T);
    double prod = 1.0;
    for (int t = 0; t < T; ++t) {
      ckpt.schedule.beta[t] = beta[static_cast<size_t>(t)];
      ckpt.schedule.alpha[t] = 1.0 - beta[static_cast<size_t>(t)];
      prod *= ckpt.schedule.alpha[t];
      ckpt.schedule.alphabar[t] = prod;
    }
    ckpt.schedule.validate();

    ckpt.codec_json = header.at("codec").dump(2) + "\n";
    ckpt.layout_json = header.at("layout").dump(2) + "\n";
    ckpt.codec_fingerprint = std::stoull(header.at("codec_fingerprint").get<std::string>(), nullptr, 16);
    ckpt.layout_fingerprint =
        std::stoull(header.at("layout_fingerprint").get<std::string>(), nullptr, 16);
    ckpt.config_echo = header.at("config_echo").dump();

    const size_t scalar_bytes = ckpt.dtype == "f32" ? 4 : 8;
    for (const auto& jt : header.at("tensors")) {
      Checkpoint::TensorBlob blob;
      blob.name = jt.at("name").get<std::string>();
      blob.shape = jt.at("shape").get<std::vector<int>>();
      const uint64_t bytes = jt.at("bytes").get<uint64_t>();
      if (bytes != static_cast<uint64_t>(shape_product(blob.shape)) * scalar_bytes)
        throw DataError("tensor '" + blob.name + "' byte count does not match its shape");
      blob.data.resize(bytes / scalar_bytes);
      ckpt.tensors.push_back(std::move(blob));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint header: ") + e.what());
  }

  for (auto& blob : ckpt.tensors) {
    if (ckpt.dtype == "f32") {
      std::vector<float> narrow(blob.data.size());
      in.read(reinterpret_cast<char*>(narrow.data()),
              static_cast<std::streamsize>(narrow.size() * 4));
      for (size_t i = 0; i < narrow.size(); ++i) blob.data[i] = static_cast<double>(narrow[i]);
    } else {
      in.read(reinterpret_cast<char*>(blob.data.data()),
              static_cast<std::streamsize>(blob.data.size() * 8));
    }
    if (!in) throw DataError("truncated checkpoint tensor payload: " + blob.name);
  }
  in.peek();
  if (!in.eof()) throw DataError("trailing bytes after checkpoint payload: " + path);
  return ckpt;
}

}  // namespace tabdiff
