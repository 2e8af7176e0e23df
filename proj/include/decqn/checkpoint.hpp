#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "decqn/common.hpp"
#include "decqn/network.hpp"
#include "decqn/optim.hpp"

namespace decqn {

// Binary checkpoint layout (native little-endian):
//   8-byte magic "DECQNCK1", u32 version, u32 scalar byte width,
//   then sections written by the owner (agent): network parameters, optimizer
//   state, counters. Tensors are written in visit() order as raw spans
//   prefixed with an element count.

inline constexpr char kCheckpointMagic[8] = {'D', 'E', 'C', 'Q', 'N', 'C', 'K', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace io {

template <typename P>
void write_pod(std::ostream& os, const P& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(P));
}

template <typename P>
P read_pod(std::istream& is) {
  P v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(P));
  if (!is) throw DataError("checkpoint: unexpected end of stream");
  return v;
}

template <typename T>
void write_span(std::ostream& os, const T* d, std::size_t n) {
  write_pod<std::uint64_t>(os, n);
  os.write(reinterpret_cast<const char*>(d), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_span(std::istream& is, T* d, std::size_t expect) {
  const auto n = read_pod<std::uint64_t>(is);
  if (n != expect)
    throw DataError("checkpoint: tensor has " + std::to_string(n) +
                    " elements, expected " + std::to_string(expect));
  is.read(reinterpret_cast<char*>(d), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw DataError("checkpoint: unexpected end of stream");
}

}  // namespace io

template <typename T>
void write_header(std::ostream& os) {
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::write_pod<std::uint32_t>(os, kCheckpointVersion);
  io::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(sizeof(T)));
}

template <typename T>
void read_header(std::istream& is) {
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw DataError("checkpoint: bad magic, not a checkpoint file");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion)
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  const auto width = io::read_pod<std::uint32_t>(is);
  if (width != sizeof(T))
    throw DataError("checkpoint: scalar width " + std::to_string(width) +
                    " does not match the configured precision (" +
                    std::to_string(sizeof(T)) + ")");
}

template <typename T>
void write_params(std::ostream& os, const MlpParams<T>& p) {
  io::write_pod<std::int32_t>(os, p.shape.in);
  io::write_pod<std::int32_t>(os, p.shape.hidden);
  io::write_pod<std::int32_t>(os, p.shape.out);
  p.visit([&](const char*, const T* d, std::size_t n) { io::write_span(os, d, n); });
}

template <typename T>
void read_params(std::istream& is, MlpParams<T>& p) {
  MlpShape s;
  s.in = io::read_pod<std::int32_t>(is);
  s.hidden = io::read_pod<std::int32_t>(is);
  s.out = io::read_pod<std::int32_t>(is);
  if (!(p.shape == s)) {
    if (p.shape.in == 0 && p.shape.hidden == 0 && p.shape.out == 0) {
      p = MlpParams<T>::zeros(s);
    } else {
      throw DataError("checkpoint: network shape " + std::to_string(s.in) + "x" +
                      std::to_string(s.hidden) + "x" + std::to_string(s.out) +
                      " does not match the configured shape");
    }
  }
  p.visit([&](const char*, T* d, std::size_t n) { io::read_span(is, d, n); });
}

template <typename T>
void write_adam(std::ostream& os, const AdamState<T>& a) {
  io::write_pod<std::int64_t>(os, a.step);
  io::write_pod<double>(os, a.lr);
  io::write_pod<double>(os, a.beta1);
  io::write_pod<double>(os, a.beta2);
  io::write_pod<double>(os, a.eps);
  write_params(os, a.m);
  write_params(os, a.v);
}

template <typename T>
void read_adam(std::istream& is, AdamState<T>& a) {
  a.step = io::read_pod<std::int64_t>(is);
  a.lr = io::read_pod<double>(is);
  a.beta1 = io::read_pod<double>(is);
  a.beta2 = io::read_pod<double>(is);
  a.eps = io::read_pod<double>(is);
  read_params(is, a.m);
  read_params(is, a.v);
}

}  // namespace decqn
