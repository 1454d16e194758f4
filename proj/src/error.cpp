#include "evbench/error.hpp"

namespace evbench {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::NotPe: return "NotPe";
    case Errc::Truncated: return "Truncated";
    case Errc::Malformed: return "Malformed";
    case Errc::InconsistentLayout: return "InconsistentLayout";
    case Errc::UnmappedRva: return "UnmappedRva";
    case Errc::NoSections: return "NoSections";
    case Errc::NoHeaderSlack: return "NoHeaderSlack";
    case Errc::NoSlack: return "NoSlack";
    case Errc::NoImportDirectory: return "NoImportDirectory";
    case Errc::NoRoom: return "NoRoom";
    case Errc::AllActionsInapplicable: return "AllActionsInapplicable";
    case Errc::RangeOutOfBounds: return "RangeOutOfBounds";
    case Errc::FileTooSmall: return "FileTooSmall";
    case Errc::DetectorFailure: return "DetectorFailure";
    case Errc::AdapterTimeout: return "AdapterTimeout";
    case Errc::AdapterProtocolError: return "AdapterProtocolError";
    case Errc::AdapterCrashed: return "AdapterCrashed";
    case Errc::DegenerateCorpus: return "DegenerateCorpus";
    case Errc::BadMagic: return "BadMagic";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::Corrupt: return "Corrupt";
    case Errc::MissingRoot: return "MissingRoot";
    case Errc::LabelConflict: return "LabelConflict";
    case Errc::NotEnoughFiles: return "NotEnoughFiles";
    case Errc::DegenerateFraction: return "DegenerateFraction";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::ZeroClass: return "ZeroClass";
    case Errc::PackerFailed: return "PackerFailed";
    case Errc::PackerMissing: return "PackerMissing";
    case Errc::MutatorFailed: return "MutatorFailed";
    case Errc::PreconditionViolated: return "PreconditionViolated";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace evbench
