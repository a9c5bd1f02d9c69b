#pragma once

#include <stdexcept>
#include <string>

namespace archmap {

/// Base of every error raised by the pipeline. `kind()` is the stable short
/// name used in diagnostics and per-case failure records.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string &what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string &kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define ARCHMAP_DEFINE_ERROR(Name)                                             \
    class Name : public Error {                                                \
    public:                                                                    \
        explicit Name(const std::string &what) : Error(#Name, what) {}         \
    }

// mesh_io
ARCHMAP_DEFINE_ERROR(FileNotFound);
ARCHMAP_DEFINE_ERROR(TruncatedFile);
ARCHMAP_DEFINE_ERROR(MalformedAscii);
ARCHMAP_DEFINE_ERROR(EmptyMesh);
ARCHMAP_DEFINE_ERROR(InvalidMesh);
// arch_fit
ARCHMAP_DEFINE_ERROR(DegenerateDesign);
ARCHMAP_DEFINE_ERROR(InvalidConfig);
// render
ARCHMAP_DEFINE_ERROR(DegenerateBounds);
// dkb
ARCHMAP_DEFINE_ERROR(OntologyInvalid);
ARCHMAP_DEFINE_ERROR(UnknownCode);
// vlm_infer
ARCHMAP_DEFINE_ERROR(BackendUnreachable);
ARCHMAP_DEFINE_ERROR(BackendRejected);
// eval
ARCHMAP_DEFINE_ERROR(ZeroGroundTruth);
ARCHMAP_DEFINE_ERROR(LengthMismatch);
ARCHMAP_DEFINE_ERROR(NoValidReports);

#undef ARCHMAP_DEFINE_ERROR

} // namespace archmap
