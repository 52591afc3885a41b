#include "exitwise/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "exitwise/errors.hpp"
#include "exitwise/io_util.hpp"

namespace exitwise {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'E', 'C'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::string& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.append(b, 4);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        parts.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return parts;
}

int parse_int(const std::string& s, const char* what) {
    try {
        return std::stoi(s);
    } catch (const std::exception&) {
        throw FormatError(std::string("checkpoint descriptor: bad ") + what + " '" +
                          s + "'");
    }
}

}  // namespace

std::string encode_descriptor(const ModelF& model) {
    const Arch& a = model.arch;
    std::ostringstream d;
    d << "depth=" << a.depth << ";width=" << a.width << ";in=" << a.in_h << "x"
      << a.in_w << "x" << a.in_c << ";classes=" << a.classes << ";exits=";
    for (std::size_t i = 0; i < a.exits.size(); ++i) {
        if (i) d << ",";
        d << a.exits[i];
    }
    if (model.has_calibration()) {
        d << ";calib=";
        char buf[64];
        for (std::size_t i = 0; i < model.calibration.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%.17g", model.calibration[i]);
            if (i) d << ",";
            d << buf;
        }
    }
    return d.str();
}

ModelF decode_descriptor(const std::string& descriptor) {
    ModelF model;
    Arch& a = model.arch;
    a = Arch{};
    bool have_exits = false;
    for (const std::string& field : split(descriptor, ';')) {
        const std::size_t eq = field.find('=');
        if (eq == std::string::npos)
            throw FormatError("checkpoint descriptor: malformed field '" + field + "'");
        const std::string key = field.substr(0, eq);
        const std::string value = field.substr(eq + 1);
        if (key == "depth") {
            a.depth = parse_int(value, "depth");
        } else if (key == "width") {
            a.width = parse_int(value, "width");
        } else if (key == "in") {
            const auto dims = split(value, 'x');
            if (dims.size() != 3)
                throw FormatError("checkpoint descriptor: bad input shape '" + value +
                                  "'");
            a.in_h = parse_int(dims[0], "input height");
            a.in_w = parse_int(dims[1], "input width");
            a.in_c = parse_int(dims[2], "input channels");
        } else if (key == "classes") {
            a.classes = parse_int(value, "class count");
        } else if (key == "exits") {
            for (const std::string& e : split(value, ','))
                a.exits.push_back(parse_int(e, "exit layer"));
            have_exits = true;
        } else if (key == "calib") {
            for (const std::string& c : split(value, ','))
                model.calibration.push_back(std::stod(c));
        } else {
            throw FormatError("checkpoint descriptor: unknown field '" + key + "'");
        }
    }
    if (!have_exits) throw FormatError("checkpoint descriptor: missing exits");
    try {
        a.validate();
    } catch (const Error& e) {
        throw FormatError(std::string("checkpoint descriptor: ") + e.what());
    }
    if (!model.calibration.empty() && model.calibration.size() != a.exits.size())
        throw FormatError("checkpoint descriptor: calibration length mismatch");
    return model;
}

void save_checkpoint(const ModelF& model, const std::filesystem::path& path) {
    std::string payload;
    payload.append(kMagic, 4);
    put_u32(payload, kVersion);

    const std::string descriptor = encode_descriptor(model);
    put_u32(payload, static_cast<std::uint32_t>(descriptor.size()));
    payload += descriptor;

    auto append_tensor = [&payload](const TensorF& t) {
        payload.append(reinterpret_cast<const char*>(t.data()),
                       t.size() * sizeof(float));
    };
    for (const auto& bank : model.trunk) {
        append_tensor(bank.filters);
        append_tensor(bank.bias);
    }
    for (const auto& head : model.heads) {
        append_tensor(head.weights);
        append_tensor(head.bias);
    }
    write_file_atomic(path, payload);
}

ModelF load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint: " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    std::size_t pos = 0;
    auto need = [&](std::size_t n, const char* what) {
        if (pos + n > bytes.size())
            throw CheckpointTruncatedError(path.string() +
                                           ": truncated checkpoint while reading " +
                                           what);
    };
    need(4, "magic");
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw CheckpointMagicError(path.string() + ": bad checkpoint magic");
    pos = 4;
    need(4, "version");
    std::uint32_t version;
    std::memcpy(&version, bytes.data() + pos, 4);
    pos += 4;
    if (version != kVersion)
        throw CheckpointVersionError(path.string() + ": unsupported checkpoint version " +
                                     std::to_string(version));
    need(4, "descriptor length");
    std::uint32_t dlen;
    std::memcpy(&dlen, bytes.data() + pos, 4);
    pos += 4;
    need(dlen, "descriptor");
    ModelF model = decode_descriptor(bytes.substr(pos, dlen));
    pos += dlen;

    const Arch& a = model.arch;
    auto read_tensor = [&](std::vector<std::size_t> shape, const char* what) {
        TensorF t(std::move(shape));
        need(t.size() * sizeof(float), what);
        std::memcpy(t.data(), bytes.data() + pos, t.size() * sizeof(float));
        pos += t.size() * sizeof(float);
        return t;
    };
    for (int l = 1; l < a.depth; ++l) {
        const std::size_t in_c = static_cast<std::size_t>(l == 1 ? a.in_c : a.width);
        ConvFilterBank<float> bank;
        bank.filters = read_tensor({static_cast<std::size_t>(kFilterSize),
                                    static_cast<std::size_t>(kFilterSize), in_c,
                                    static_cast<std::size_t>(a.width)},
                                   "conv filters");
        bank.bias = read_tensor({static_cast<std::size_t>(a.width)}, "conv bias");
        model.trunk.push_back(std::move(bank));
    }
    for (int e : a.exits) {
        FcWeights<float> head;
        head.weights = read_tensor({static_cast<std::size_t>(a.flatten_size(e)),
                                    static_cast<std::size_t>(a.classes)},
                                   "head weights");
        head.bias = read_tensor({static_cast<std::size_t>(a.classes)}, "head bias");
        model.heads.push_back(std::move(head));
    }
    if (pos != bytes.size())
        throw FormatError(path.string() + ": trailing bytes after parameter arrays");
    return model;
}

}  // namespace exitwise
