#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace refctl {

/// Streaming JSON emitter with stable key order and doubles printed with 17
/// significant digits, so equal results always serialize to equal bytes.
/// Non-finite doubles are written as null.
class JsonWriter {
public:
    explicit JsonWriter(int indent = 2) : indent_(indent) {}

    JsonWriter& begin_object();
    JsonWriter& end_object();
    JsonWriter& begin_array();
    JsonWriter& end_array();
    JsonWriter& key(const std::string& k);

    JsonWriter& value(double v);
    JsonWriter& value(std::int64_t v);
    JsonWriter& value(std::uint64_t v);
    JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(unsigned v) { return value(static_cast<std::uint64_t>(v)); }
    JsonWriter& value(bool v);
    JsonWriter& value(const std::string& v);
    JsonWriter& value(const char* v) { return value(std::string(v)); }
    JsonWriter& null();
    JsonWriter& value(const std::vector<double>& v);

    template <class T>
    JsonWriter& field(const std::string& k, const T& v) {
        key(k);
        return value(v);
    }

    /// The document so far, newline-terminated once complete.
    std::string str() const;

    static std::string format_double(double v);
    static std::string escape(const std::string& s);

private:
    void before_value();
    void newline();

    struct Level {
        bool array = false;
        bool empty = true;
    };
    std::string out_;
    std::vector<Level> stack_;
    bool after_key_ = false;
    int indent_;
};

}  // namespace refctl
