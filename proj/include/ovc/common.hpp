#ifndef OVC_COMMON_HPP
#define OVC_COMMON_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ovc {

// Error categories surfaced by the CLI as machine-readable prefixes.
struct dimension_error : std::runtime_error {
    explicit dimension_error(const std::string& m) : std::runtime_error("dimension: " + m) {}
};
struct config_error : std::runtime_error {
    explicit config_error(const std::string& m) : std::runtime_error("config: " + m) {}
};
struct format_error : std::runtime_error {
    explicit format_error(const std::string& m) : std::runtime_error("format: " + m) {}
};
struct stream_error : std::runtime_error {
    explicit stream_error(const std::string& m) : std::runtime_error("stream: " + m) {}
};
struct training_error : std::runtime_error {
    explicit training_error(const std::string& m) : std::runtime_error("training: " + m) {}
};
struct pipeline_error : std::runtime_error {
    explicit pipeline_error(const std::string& m) : std::runtime_error("pipeline: " + m) {}
};
struct metric_error : std::runtime_error {
    explicit metric_error(const std::string& m) : std::runtime_error("metric: " + m) {}
};
struct io_error : std::runtime_error {
    explicit io_error(const std::string& m) : std::runtime_error("io: " + m) {}
};

}  // namespace ovc

#endif
