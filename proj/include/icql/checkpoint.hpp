#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "icql/nn.hpp"

namespace icql {

// Flat textual dump of every named tensor:
//
//   icql-checkpoint 1
//   meta <key> <value>
//   tensor <name> <rows> <cols>
//   <one row of %.17g values per line>
//
// %.17g round-trips doubles exactly and floats a fortiori, so a save/load
// cycle is bitwise faithful.

namespace detail {

template <class Tensor>
void write_tensor(std::ostream& out, const char* name, const Tensor& t) {
  out << "tensor " << name << ' ' << t.rows() << ' ' << t.cols() << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < t.rows(); ++r) {
    for (Eigen::Index c = 0; c < t.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", static_cast<double>(t(r, c)));
      if (c) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

}  // namespace detail

template <class T>
void save_checkpoint(const std::string& path, const AgentNet<T>& agent,
                     const CentralNet<T>& central,
                     const std::map<std::string, std::string>& meta = {}) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
  out << "icql-checkpoint 1\n";
  for (const auto& [k, v] : meta) out << "meta " << k << ' ' << v << '\n';
  for_each_tensor([&out](const char* name, auto& t) { detail::write_tensor(out, name, t); },
                  const_cast<AgentNet<T>&>(agent));
  for_each_tensor([&out](const char* name, auto& t) { detail::write_tensor(out, name, t); },
                  const_cast<CentralNet<T>&>(central));
  if (!out) throw std::runtime_error("failed while writing checkpoint '" + path + "'");
}

template <class T>
std::map<std::string, std::string> load_checkpoint(const std::string& path, AgentNet<T>& agent,
                                                   CentralNet<T>& central) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "icql-checkpoint 1")
    throw std::runtime_error("'" + path + "' is not an icql checkpoint");

  std::map<std::string, std::string> meta;
  struct Entry {
    Eigen::Index rows, cols;
    std::vector<double> values;  // row-major
  };
  std::map<std::string, Entry> tensors;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "meta") {
      std::string k, v;
      ls >> k;
      std::getline(ls, v);
      meta[k] = v.empty() ? v : v.substr(1);
    } else if (tag == "tensor") {
      std::string name;
      Entry e;
      ls >> name >> e.rows >> e.cols;
      if (!ls) throw std::runtime_error("checkpoint '" + path + "': bad tensor header");
      e.values.reserve(static_cast<size_t>(e.rows * e.cols));
      for (Eigen::Index r = 0; r < e.rows; ++r) {
        if (!std::getline(in, line))
          throw std::runtime_error("checkpoint '" + path + "': truncated tensor " + name);
        std::istringstream vs(line);
        for (Eigen::Index c = 0; c < e.cols; ++c) {
          double v;
          if (!(vs >> v))
            throw std::runtime_error("checkpoint '" + path + "': truncated tensor " + name);
          e.values.push_back(v);
        }
      }
      tensors[name] = std::move(e);
    } else {
      throw std::runtime_error("checkpoint '" + path + "': unknown line '" + line + "'");
    }
  }

  auto restore = [&tensors, &path](const char* name, auto& t) {
    auto it = tensors.find(name);
    if (it == tensors.end())
      throw std::runtime_error("checkpoint '" + path + "': missing tensor " + name);
    const Entry& e = it->second;
    if (e.rows != t.rows() || e.cols != t.cols())
      throw std::runtime_error("checkpoint '" + path + "': tensor " + name +
                               " has shape " + std::to_string(e.rows) + "x" +
                               std::to_string(e.cols) + ", expected " +
                               std::to_string(t.rows()) + "x" + std::to_string(t.cols()));
    using Scalar = typename std::decay_t<decltype(t)>::Scalar;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c)
        t(r, c) = static_cast<Scalar>(e.values[static_cast<size_t>(r * t.cols() + c)]);
  };
  for_each_tensor(restore, agent);
  for_each_tensor(restore, central);
  return meta;
}

}  // namespace icql
