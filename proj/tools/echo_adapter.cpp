// Reference detector adapter speaking the line protocol on stdin/stdout.
// Scores come from command-line options so tests can script every reply.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

namespace {

std::vector<unsigned char> parse_hex(const std::string& hex) {
  std::vector<unsigned char> out;
  for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
    out.push_back(static_cast<unsigned char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
  }
  return out;
}

bool file_contains(const std::string& path, const std::vector<unsigned char>& marker) {
  std::ifstream in(path, std::ios::binary);
  std::vector<unsigned char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return !marker.empty() && std::search(data.begin(), data.end(), marker.begin(), marker.end()) != data.end();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Echo adapter"};
  std::string score = "0.5";
  std::string decision;
  std::string error;
  std::string marker;
  std::string raw_reply;
  int hang_ms = 0;
  int crash_after = -1;
  bool no_ready = false;
  app.add_option("--score", score, "Reply SCORE <value>");
  app.add_option("--decision", decision, "Reply DECISION MALICIOUS or DECISION BENIGN");
  app.add_option("--error", error, "Reply ERROR <message>");
  app.add_option("--marker", marker, "Score 1 when the file contains this hex pattern, else 0");
  app.add_option("--raw-reply", raw_reply, "Reply this line verbatim");
  app.add_option("--hang-ms", hang_ms, "Sleep before every reply");
  app.add_option("--crash-after", crash_after, "Exit without replying on scan number N+1");
  app.add_flag("--no-ready", no_ready, "Never announce READY");
  CLI11_PARSE(app, argc, argv);

  if (no_ready) {
    std::this_thread::sleep_for(std::chrono::hours(1));
    return 0;
  }
  std::cout << "READY" << std::endl;
  int scans = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line == "QUIT") return 0;
    if (line.rfind("SCAN ", 0) != 0) {
      std::cout << "ERROR unknown command" << std::endl;
      continue;
    }
    if (crash_after >= 0 && scans >= crash_after) std::_Exit(3);
    ++scans;
    if (hang_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(hang_ms));
    const std::string path = line.substr(5);
    if (!raw_reply.empty()) {
      std::cout << raw_reply << std::endl;
    } else if (!error.empty()) {
      std::cout << "ERROR " << error << std::endl;
    } else if (!decision.empty()) {
      std::cout << "DECISION " << decision << std::endl;
    } else if (!marker.empty()) {
      std::cout << "SCORE " << (file_contains(path, parse_hex(marker)) ? "1" : "0") << std::endl;
    } else {
      std::cout << "SCORE " << score << std::endl;
    }
  }
  return 0;
}
