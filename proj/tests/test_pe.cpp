#include "doctest.h"

#include "evbench/error.hpp"
#include "evbench/pe.hpp"
#include "evbench/sha256.hpp"
#include "support.hpp"

using namespace evbench;
using testsupport::build_hand_pe;

namespace {

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an evbench::Error");
  return Errc::IoError;
}

}  // namespace

TEST_CASE("hand-built one-section PE parses to the fields it was built from") {
  const Bytes b = build_hand_pe();
  const PeFile pe = parse_pe(b, ParseMode::Strict);
  CHECK(pe.dos.e_lfanew == 0x40);
  CHECK(pe.coff.machine == 0x014C);
  CHECK(pe.coff.number_of_sections == 1);
  REQUIRE(pe.sections.size() == 1);
  CHECK_FALSE(pe.optional.pe32_plus);
  CHECK(pe.optional.entry_point_rva == 0x1010);
  CHECK(pe.optional.image_base == 0x400000);
  CHECK(pe.optional.section_alignment == 0x1000);
  CHECK(pe.optional.file_alignment == 0x200);
  CHECK(pe.optional.size_of_image == 0x2000);
  CHECK(pe.optional.size_of_headers == 0x400);
  CHECK(pe.optional.data_directories.size() == 16);
  const Section& s = pe.sections[0];
  CHECK(s.name_string() == ".text");
  CHECK(s.virtual_address == 0x1000);
  CHECK(s.virtual_size == 0x100);
  CHECK(s.raw_pointer == 0x400);
  CHECK(s.raw_size == 0x200);
  CHECK(pe.overlay().empty());
  CHECK(pe.overlay().begin == b.size());
  CHECK(validate(pe).empty());
}

TEST_CASE("overlay covers bytes past the last section") {
  const Bytes b = build_hand_pe({.overlay = 37});
  const PeFile pe = parse_pe(b);
  CHECK(pe.overlay() == ByteRange{0x600, 0x600 + 37});
}

TEST_CASE("parse errors") {
  CHECK(error_of([] { parse_pe(Bytes{}); }) == Errc::NotPe);
  CHECK(error_of([] { parse_pe(Bytes{'Z', 'M', 0, 0}); }) == Errc::NotPe);
  Bytes garbage = {'M', 'Z', 0x13, 0x37, 0x42};
  CHECK(error_of([&] { parse_pe(garbage); }) == Errc::Truncated);

  Bytes no_sig = build_hand_pe();
  no_sig[0x40] = 'X';
  CHECK(error_of([&] { parse_pe(no_sig); }) == Errc::NotPe);

  Bytes cut = build_hand_pe();
  cut.resize(0x40 + 4 + 20 + 100);
  CHECK(error_of([&] { parse_pe(cut); }) == Errc::Truncated);
}

TEST_CASE("strict mode rejects a section past EOF; lenient mode lists it") {
  Bytes b = build_hand_pe();
  const std::size_t sec = 0x40 + 4 + 20 + 224;
  write_le32(b, sec + 16, 0x400);  // raw_size now runs past EOF
  CHECK(error_of([&] { parse_pe(b, ParseMode::Strict); }) == Errc::Malformed);
  const PeFile pe = parse_pe(b, ParseMode::Lenient);
  const auto v = validate(pe);
  REQUIRE(v.size() == 1);
  REQUIRE(v[0].section.has_value());
  CHECK(*v[0].section == 0);
  CHECK(v[0].message.find("EOF") != std::string::npos);
}

TEST_CASE("overlapping raw ranges are reported") {
  SyntheticPeOptions opts;
  opts.num_sections = 2;
  Bytes b = testsupport::synthetic_with(3, opts);
  const PeFile pe = parse_pe(b, ParseMode::Strict);
  REQUIRE(pe.sections.size() == 2);
  write_le32(b, pe.section_header_offset(1) + 20, pe.sections[0].raw_pointer);
  bool overlap = false;
  for (const auto& v : validate(parse_pe(b))) overlap |= v.message.find("raw ranges") != std::string::npos;
  CHECK(overlap);
}

TEST_CASE("serialize is the identity on unmodified files") {
  CHECK(serialize(parse_pe(build_hand_pe())) == build_hand_pe());
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Bytes b = testsupport::synthetic(seed, seed % 2 == 1);
    const PeFile pe = parse_pe(b, ParseMode::Strict);
    CHECK(validate(pe).empty());
    CHECK(serialize(pe) == b);
  }
}

TEST_CASE("rewriting a field to its own value is byte-identical") {
  const Bytes b = testsupport::synthetic(11);
  PeFile pe = parse_pe(b);
  pe.optional.checksum = pe.optional.checksum;
  pe.sections[0].set_name(pe.sections[0].name_string());
  CHECK(serialize(pe) == b);
}

TEST_CASE("renaming a section through the model touches only its 8 name bytes") {
  const Bytes b = build_hand_pe();
  PeFile pe = parse_pe(b);
  pe.sections[0].set_name(".rsrc");
  const Bytes out = serialize(pe);
  const auto diff = testsupport::diff_offsets(b, out);
  REQUIRE(out.size() == b.size());
  const std::size_t name_at = pe.section_header_offset(0);
  for (std::size_t off : diff) {
    CHECK(off >= name_at);
    CHECK(off < name_at + 8);
  }
  CHECK_FALSE(diff.empty());
}

TEST_CASE("an edit that overlaps raw ranges cannot be serialized") {
  SyntheticPeOptions opts;
  opts.num_sections = 2;
  PeFile pe = parse_pe(testsupport::synthetic_with(5, opts));
  pe.sections[1].raw_pointer = pe.sections[0].raw_pointer;
  CHECK(error_of([&] { serialize(pe); }) == Errc::InconsistentLayout);
}

TEST_CASE("checksum of an all-zero file equals its length") {
  for (std::size_t n : {128u, 4096u, 4097u, 65536u}) {
    CHECK(compute_pe_checksum(Bytes(n, 0)) == n);
  }
  CHECK(error_of([] { compute_pe_checksum(Bytes(16, 0)); }) == Errc::Truncated);
  CHECK(error_of([] { compute_pe_checksum(Bytes(90, 0)); }) == Errc::Truncated);
}

TEST_CASE("checksum agrees with the independent oracle") {
  for (std::uint64_t seed = 100; seed < 110; ++seed) {
    Bytes b = testsupport::synthetic(seed, seed % 2 == 0);
    CHECK(compute_pe_checksum(b) == testsupport::checksum_oracle(b));
    // The generator writes a valid checksum.
    CHECK(parse_pe(b).optional.checksum == compute_pe_checksum(b));
    b.push_back(0xAB);  // odd length
    CHECK(compute_pe_checksum(b) == testsupport::checksum_oracle(b));
  }
  Rng rng(9);
  for (int i = 0; i < 20; ++i) {
    Bytes b(static_cast<std::size_t>(rng.between(100, 3000)));
    rng.fill(b);
    write_le32(b, 0x3C, static_cast<std::uint32_t>(rng.below(8)));
    CHECK(compute_pe_checksum(b) == testsupport::checksum_oracle(b));
  }
}

TEST_CASE("checksum ignores its own field and reacts to other bytes") {
  Bytes b = build_hand_pe();
  const std::uint32_t c = compute_pe_checksum(b);
  const std::size_t field = 0x40 + 4 + 20 + 64;
  write_le32(b, field, 0xDEADBEEF);
  CHECK(compute_pe_checksum(b) == c);
  b[0x500] ^= 0x01;
  CHECK(compute_pe_checksum(b) != c);
  CHECK(compute_pe_checksum(b) == compute_pe_checksum(b));
}

TEST_CASE("rva_to_offset maps through the section table") {
  const PeFile pe = parse_pe(build_hand_pe());
  CHECK(rva_to_offset(pe, 0x1000) == 0x400);
  CHECK(rva_to_offset(pe, 0x1000 + 0x1FF) == 0x5FF);
  CHECK(rva_to_offset(pe, 0x10) == 0x10);  // header region
  CHECK(error_of([&] { rva_to_offset(pe, 0x5000); }) == Errc::UnmappedRva);
  CHECK_FALSE(try_rva_to_offset(pe, 0x1200).has_value());
}

TEST_CASE("rva_to_offset is consistent with every section's raw mapping") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PeFile pe = parse_pe(testsupport::synthetic(seed));
    for (const auto& s : pe.sections) {
      for (std::uint32_t k : {0u, 1u, s.raw_size / 2, s.raw_size - 1}) {
        const std::uint32_t off = rva_to_offset(pe, s.virtual_address + k);
        CHECK(s.raw_range().contains(off));
        CHECK(off == s.raw_pointer + k);
      }
    }
  }
}

TEST_CASE("synthetic files carry the declared directories") {
  SyntheticPeOptions opts;
  opts.num_sections = 3;
  opts.pe32_plus = true;
  opts.with_certificate = true;
  const Bytes b = testsupport::synthetic_with(21, opts);
  const PeFile pe = parse_pe(b, ParseMode::Strict);
  CHECK(pe.optional.pe32_plus);
  CHECK(pe.sections.size() == 3);
  const auto imports = read_imports(pe);
  REQUIRE(imports.size() == 1);
  CHECK(imports[0] == ImportEntry{"KERNEL32.dll", "ExitProcess"});
  CHECK(read_debug_directory(pe).size() == 1);
  const auto cert = pe.certificate_range();
  REQUIRE(cert.has_value());
  CHECK(cert->end == b.size());
  CHECK(pe.overlay().empty());
}

TEST_CASE("RawBinary hashes its bytes") {
  const Bytes b = {'a', 'b', 'c'};
  const RawBinary bin(b, Label::Malicious, "x");
  CHECK(bin.sha256_hex() == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(bin.label() == Label::Malicious);
  CHECK(parse_label("BENIGN") == Label::Benign);
  CHECK(error_of([] { parse_label("evil"); }) == Errc::InvalidArgument);
}

TEST_CASE("raw data running past the next section's address maps to the next section") {
  SyntheticPeOptions opts;
  opts.num_sections = 2;
  Bytes b = testsupport::synthetic_with(8, opts);
  PeFile pe = parse_pe(b);
  const Section s1 = pe.sections[1];
  // Grow section 0's raw window so it covers section 1's first addresses too.
  const std::uint32_t gap = s1.virtual_address - pe.sections[0].virtual_address;
  write_le32(b, pe.section_header_offset(0) + 16, gap + 0x200);
  pe = parse_pe(b);
  CHECK(rva_to_offset(pe, s1.virtual_address) == s1.raw_pointer);
  CHECK(rva_to_offset(pe, pe.sections[0].virtual_address + 5) == pe.sections[0].raw_pointer + 5);
}
