#include "binconv/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <string>
#include <vector>

#include <json.hpp>

#include "binconv/data.hpp"
#include "binconv/run_config.hpp"

namespace binconv {

using nlohmann::json;

namespace {

constexpr const char* kFormatName = "binconv-checkpoint";

void put_le32(std::string& out, float v)
{
	std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
	for (int i = 0; i < 4; ++i) {
		out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
	}
}

float get_le32(const char* p)
{
	std::uint32_t bits = 0;
	for (int i = 0; i < 4; ++i) {
		bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
	}
	return std::bit_cast<float>(bits);
}

json read_manifest(const std::filesystem::path& dir)
{
	const auto path = dir / "manifest.json";
	if (!std::filesystem::exists(path)) {
		throw CheckpointError("checkpoint: missing manifest '" + path.string() + "'");
	}
	json m;
	try {
		m = json::parse(read_file(path));
	} catch (const json::parse_error& e) {
		throw CheckpointError(std::string("checkpoint: unreadable manifest: ") + e.what());
	}
	if (m.value("format", std::string()) != kFormatName) {
		throw CheckpointError("checkpoint: not a binconv checkpoint");
	}
	const int version = m.value("format_version", -1);
	if (version != kCheckpointFormatVersion) {
		throw CheckpointError("checkpoint: version mismatch (file has " + std::to_string(version) + ", expected " +
		                      std::to_string(kCheckpointFormatVersion) + ")");
	}
	if (m.value("dtype", std::string()) != "float32" || m.value("byte_order", std::string()) != "little") {
		throw CheckpointError("checkpoint: unsupported dtype or byte order");
	}
	return m;
}

void fill_from_payload(BinConvModel<float>& model, const json& manifest, const std::filesystem::path& dir)
{
	const std::string payload = read_file(dir / "params.bin");
	const auto expected = manifest.at("payload_bytes").get<std::size_t>();
	if (payload.size() < expected) {
		throw CheckpointError("checkpoint: truncated payload (" + std::to_string(payload.size()) + " of " +
		                      std::to_string(expected) + " bytes)");
	}
	if (payload.size() > expected) {
		throw CheckpointError("checkpoint: payload has " + std::to_string(payload.size() - expected) +
		                      " trailing bytes");
	}

	const json& tensors = manifest.at("tensors");
	auto params = model.parameters();
	if (tensors.size() != params.size()) {
		throw CheckpointError("checkpoint: shape mismatch (" + std::to_string(tensors.size()) +
		                      " tensors in manifest, model has " + std::to_string(params.size()) + ")");
	}
	for (std::size_t i = 0; i < params.size(); ++i) {
		const json& t = tensors[i];
		Parameter<float>& p = *params[i];
		const auto name = t.at("name").get<std::string>();
		const auto shape = t.at("shape").get<Shape>();
		if (name != p.name || shape != p.value.shape()) {
			throw CheckpointError("checkpoint: shape mismatch for '" + p.name + "': model " +
			                      shape_to_string(p.value.shape()) + ", manifest '" + name + "' " +
			                      shape_to_string(shape));
		}
		const auto offset = t.at("offset").get<std::size_t>();
		const auto count = t.at("count").get<std::size_t>();
		if (count != p.size() || offset + 4 * count > payload.size()) {
			throw CheckpointError("checkpoint: bad extent for '" + name + "'");
		}
		for (std::size_t j = 0; j < count; ++j) {
			p.value[j] = get_le32(payload.data() + offset + 4 * j);
		}
	}
}

} // namespace

void save_checkpoint(const BinConvModel<float>& model, const std::filesystem::path& dir, const CheckpointMeta& meta)
{
	std::string payload;
	json tensors = json::array();
	for (const Parameter<float>* p : model.parameters()) {
		tensors.push_back(json{{"name", p->name},
		                       {"shape", p->value.shape()},
		                       {"offset", payload.size()},
		                       {"count", p->size()}});
		for (float v : p->value.data()) {
			put_le32(payload, v);
		}
	}
	const json manifest{{"format", kFormatName},
	                    {"format_version", kCheckpointFormatVersion},
	                    {"variant", variant_name(model.variant())},
	                    {"config", to_json(model.config())},
	                    {"seed", meta.seed},
	                    {"epoch", meta.epoch},
	                    {"dtype", "float32"},
	                    {"byte_order", "little"},
	                    {"payload_bytes", payload.size()},
	                    {"tensors", tensors}};
	std::filesystem::create_directories(dir);
	write_file_atomic(dir / "params.bin", payload);
	write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

BinConvModel<float> load_checkpoint(const std::filesystem::path& dir, CheckpointMeta* meta)
{
	const json manifest = read_manifest(dir);
	BinConvConfig config;
	VariantKind kind{};
	try {
		const json& c = manifest.at("config");
		config = model_config_from_json(c, c.at("context_length").get<std::size_t>());
		kind = parse_variant(manifest.at("variant").get<std::string>());
	} catch (const std::exception& e) {
		throw CheckpointError(std::string("checkpoint: bad config in manifest: ") + e.what());
	}
	const auto seed = manifest.value("seed", std::uint64_t{0});
	BinConvModel<float> model(config, kind, seed);
	fill_from_payload(model, manifest, dir);
	if (meta) {
		meta->seed = seed;
		meta->epoch = manifest.value("epoch", std::size_t{0});
	}
	return model;
}

void load_parameters(BinConvModel<float>& model, const std::filesystem::path& dir)
{
	fill_from_payload(model, read_manifest(dir), dir);
}

} // namespace binconv
