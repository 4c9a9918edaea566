#pragma once

#include <cstdio>
#include <string>
#include <vector>

// Builds small fixed-column case files for tests.
namespace cdf_builder {

inline void put(std::string& card, std::size_t col, const std::string& text) {
  if (card.size() < col - 1 + text.size()) card.resize(col - 1 + text.size(), ' ');
  card.replace(col - 1, text.size(), text);
}

inline std::string num(const char* fmt, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Bus {
  int id;
  int type = 0;
  double vm = 1.0, va_deg = 0.0, gs = 0.0, bs = 0.0, kv = 0.0;
};

struct Branch {
  int from, to;
  double r = 0.0, x = 0.1, b = 0.0, ratio = 0.0, shift = 0.0;
};

inline std::string bus_card(const Bus& b) {
  std::string c(122, ' ');
  put(c, 1, num("%4.0f", b.id));
  put(c, 6, "Bus");
  put(c, 25, num("%2.0f", b.type));
  put(c, 28, num("%6.3f", b.vm));
  put(c, 34, num("%7.2f", b.va_deg));
  put(c, 77, num("%7.1f", b.kv));
  put(c, 107, num("%8.4f", b.gs));
  put(c, 115, num("%8.4f", b.bs));
  return c;
}

inline std::string branch_card(const Branch& br) {
  std::string c(90, ' ');
  put(c, 1, num("%4.0f", br.from));
  put(c, 6, num("%4.0f", br.to));
  put(c, 19, "0");
  put(c, 20, num("%10.5f", br.r));
  put(c, 30, num("%11.5f", br.x));
  put(c, 41, num("%10.5f", br.b));
  put(c, 77, num("%6.3f", br.ratio));
  put(c, 84, num("%7.2f", br.shift));
  return c;
}

inline std::string file(const std::vector<Bus>& buses, const std::vector<Branch>& branches) {
  std::string s = " 01/01/00 TEST                  100.0  2000 W Test Case\n";
  s += "BUS DATA FOLLOWS                            " + std::to_string(buses.size()) + " ITEMS\n";
  for (const auto& b : buses) s += bus_card(b) + "\n";
  s += "-999\nBRANCH DATA FOLLOWS                         " + std::to_string(branches.size()) + " ITEMS\n";
  for (const auto& br : branches) s += branch_card(br) + "\n";
  s += "-999\nEND OF DATA\n";
  return s;
}

}  // namespace cdf_builder
