// Stand-in for external packers and injection tools:
//   mock_transform copy|xor|fail|noout|append HEX IN OUT

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <iterator>
#include <string>
#include <vector>

int main(int argc, char** argv) {
  if (argc < 4) {
    std::cerr << "usage: mock_transform copy|xor|fail|noout|append HEX IN OUT\n";
    return 2;
  }
  const std::string mode = argv[1];
  int next = 2;
  std::string hex;
  if (mode == "append") {
    if (argc < 5) return 2;
    hex = argv[next++];
  }
  const std::string in_path = argv[next];
  const std::string out_path = argv[next + 1];
  if (mode == "fail") return 1;
  if (mode == "noout") return 0;

  std::ifstream in(in_path, std::ios::binary);
  if (!in) return 1;
  std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (mode == "xor") {
    for (auto& c : data) c = static_cast<char>(c ^ 0x5A);
  } else if (mode == "append") {
    for (std::size_t i = 0; i + 1 < hex.size(); i += 2) {
      data.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    }
  } else if (mode != "copy") {
    return 2;
  }
  std::ofstream out(out_path, std::ios::binary);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  return out ? 0 : 1;
}
