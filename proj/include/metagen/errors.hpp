#pragma once

#include <stdexcept>
#include <string>

namespace metagen {

/// Location inside a source program, 1-based.
struct SourceSpan {
    int line = 0;
    int col = 0;
    bool valid() const { return line > 0 && col > 0; }
};

/// Every failure in the toolchain carries a stable machine-readable code
/// (e.g. "SyntaxError", "IncompatibleLift") plus a human message. Frontend
/// errors additionally carry the offending span.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& message, SourceSpan span = {})
        : std::runtime_error(message), code_(std::move(code)), span_(span) {}

    const std::string& code() const { return code_; }
    const SourceSpan& span() const { return span_; }
    void set_span(SourceSpan s) { span_ = s; }

    /// "file:line:col: severity: message" (file/span parts omitted when unknown).
    std::string diagnostic(const std::string& file = "") const {
        std::string out;
        if (!file.empty()) out += file + ":";
        if (span_.valid()) out += std::to_string(span_.line) + ":" + std::to_string(span_.col) + ":";
        if (!out.empty()) out += " ";
        out += "error: " + std::string(what()) + " [" + code_ + "]";
        return out;
    }

  private:
    std::string code_;
    SourceSpan span_;
};

[[noreturn]] inline void fail(const std::string& code, const std::string& message,
                              SourceSpan span = {}) {
    throw Error(code, message, span);
}

}  // namespace metagen
