#pragma once

#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace sed {

using WarningHandler = std::function<void(std::string_view)>;

// Emits a warning through the installed handler (stderr by default).
void warn(std::string_view message);

// Replaces the warning handler; returns the previous one.
WarningHandler set_warning_handler(WarningHandler handler);

// Collects warnings for the lifetime of the object, restoring the previous
// handler on destruction.
class WarningCapture {
public:
    WarningCapture();
    ~WarningCapture();
    WarningCapture(const WarningCapture&) = delete;
    WarningCapture& operator=(const WarningCapture&) = delete;

    const std::vector<std::string>& messages() const { return messages_; }
    bool contains(std::string_view needle) const;

private:
    std::vector<std::string> messages_;
    WarningHandler previous_;
};

} // namespace sed
