#include "nowcast/hdf5_store.hpp"

#include <hdf5.h>

#include <algorithm>
#include <array>
#include <vector>

namespace nowcast {

namespace {

struct Hid {
    hid_t id = H5I_INVALID_HID;
    herr_t (*closer)(hid_t) = nullptr;
    Hid() = default;
    Hid(hid_t i, herr_t (*c)(hid_t)) : id(i), closer(c) {}
    ~Hid() { reset(); }
    Hid(Hid&& o) noexcept : id(o.id), closer(o.closer) { o.id = H5I_INVALID_HID; }
    Hid& operator=(Hid&& o) noexcept {
        if (this != &o) {
            reset();
            id = o.id;
            closer = o.closer;
            o.id = H5I_INVALID_HID;
        }
        return *this;
    }
    Hid(const Hid&) = delete;
    Hid& operator=(const Hid&) = delete;
    void reset() {
        if (id >= 0 && closer) closer(id);
        id = H5I_INVALID_HID;
    }
    bool ok() const { return id >= 0; }
    operator hid_t() const { return id; }
};

Hid open_dataset(hid_t file, const char* name) {
    if (H5Lexists(file, name, H5P_DEFAULT) <= 0)
        throw DataError(std::string("dataset '") + name + "' not found");
    return Hid(H5Dopen2(file, name, H5P_DEFAULT), H5Dclose);
}

std::vector<hsize_t> dataset_dims(hid_t dset, const char* name) {
    Hid space(H5Dget_space(dset), H5Sclose);
    int nd = H5Sget_simple_extent_ndims(space);
    if (nd < 0) throw DataError(std::string("dataset '") + name + "': cannot read extent");
    std::vector<hsize_t> dims(static_cast<std::size_t>(nd));
    H5Sget_simple_extent_dims(space, dims.data(), nullptr);
    return dims;
}

void write_dataset(hid_t file, const char* name, hid_t type, const std::vector<hsize_t>& dims,
                   const std::vector<hsize_t>& chunks, const void* data) {
    Hid space(H5Screate_simple(static_cast<int>(dims.size()), dims.data(), nullptr), H5Sclose);
    Hid plist(H5Pcreate(H5P_DATASET_CREATE), H5Pclose);
    H5Pset_chunk(plist, static_cast<int>(chunks.size()), chunks.data());
    H5Pset_obj_track_times(plist, 0);  // keep reruns byte-identical
    if (H5Zfilter_avail(H5Z_FILTER_DEFLATE) > 0) H5Pset_deflate(plist, 2);
    Hid dset(H5Dcreate2(file, name, type, space, H5P_DEFAULT, plist, H5P_DEFAULT), H5Dclose);
    if (!dset.ok()) throw DataError(std::string("cannot create dataset '") + name + "'");
    if (H5Dwrite(dset, type, H5S_ALL, H5S_ALL, H5P_DEFAULT, data) < 0)
        throw DataError(std::string("write failed for dataset '") + name + "'");
}

void write_string_attr(hid_t file, const char* name, const std::string& value) {
    Hid type(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(type, std::max<std::size_t>(value.size(), 1));
    Hid space(H5Screate(H5S_SCALAR), H5Sclose);
    Hid attr(H5Acreate2(file, name, type, space, H5P_DEFAULT, H5P_DEFAULT), H5Aclose);
    H5Awrite(attr, type, value.c_str());
}

std::string read_string_attr(hid_t file, const char* name) {
    if (H5Aexists(file, name) <= 0) return {};
    Hid attr(H5Aopen(file, name, H5P_DEFAULT), H5Aclose);
    Hid type(H5Aget_type(attr), H5Tclose);
    std::size_t n = H5Tget_size(type);
    std::string out(n, '\0');
    Hid mem(H5Tcopy(H5T_C_S1), H5Tclose);
    H5Tset_size(mem, n);
    H5Aread(attr, mem, out.data());
    while (!out.empty() && out.back() == '\0') out.pop_back();
    return out;
}

void write_int_attr(hid_t file, const char* name, int value) {
    Hid space(H5Screate(H5S_SCALAR), H5Sclose);
    Hid attr(H5Acreate2(file, name, H5T_NATIVE_INT, space, H5P_DEFAULT, H5P_DEFAULT), H5Aclose);
    H5Awrite(attr, H5T_NATIVE_INT, &value);
}

int read_int_attr(hid_t file, const char* name, int fallback) {
    if (H5Aexists(file, name) <= 0) return fallback;
    Hid attr(H5Aopen(file, name, H5P_DEFAULT), H5Aclose);
    int v = fallback;
    H5Aread(attr, H5T_NATIVE_INT, &v);
    return v;
}

// Reads a hyperslab [offsets, offsets+counts) into a contiguous buffer.
void read_slab(hid_t dset, hid_t type, const std::vector<hsize_t>& offset,
               const std::vector<hsize_t>& count, void* out, const char* name) {
    Hid fspace(H5Dget_space(dset), H5Sclose);
    if (H5Sselect_hyperslab(fspace, H5S_SELECT_SET, offset.data(), nullptr, count.data(), nullptr) < 0)
        throw DataError(std::string("dataset '") + name + "': hyperslab selection failed");
    Hid mspace(H5Screate_simple(static_cast<int>(count.size()), count.data(), nullptr), H5Sclose);
    if (H5Dread(dset, type, mspace, fspace, H5P_DEFAULT, out) < 0)
        throw DataError(std::string("dataset '") + name + "': read failed");
}

}  // namespace

void save_region_archive(const RegionArchive& arc, const std::string& path) {
    arc.validate();
    Hid file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw DataError("cannot create archive file: " + path);

    const hsize_t n = static_cast<hsize_t>(arc.n_slots());
    const hsize_t c = static_cast<hsize_t>(arc.satellite.dim(1));
    const hsize_t p = static_cast<hsize_t>(arc.patch());

    write_dataset(file, "satellite", H5T_NATIVE_FLOAT, {n, c, p, p}, {1, c, p, p},
                  arc.satellite.data());
    write_dataset(file, "radar", H5T_NATIVE_FLOAT, {n, p, p}, {4, p, p}, arc.radar.data());
    write_dataset(file, "radar_valid", H5T_NATIVE_UCHAR, {n, p, p}, {4, p, p},
                  arc.radar_valid.data());
    write_dataset(file, "static", H5T_NATIVE_FLOAT,
                  {static_cast<hsize_t>(arc.static_fields.dim(0)), p, p},
                  {static_cast<hsize_t>(arc.static_fields.dim(0)), p, p}, arc.static_fields.data());
    write_string_attr(file, "region_id", arc.region_id);
    write_int_attr(file, "slot_minutes", arc.slot_minutes);
}

RegionArchive load_region_archive(const std::string& path) {
    Hid file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw DataError("cannot open archive file: " + path);

    RegionArchive arc;
    arc.region_id = read_string_attr(file, "region_id");
    arc.slot_minutes = read_int_attr(file, "slot_minutes", 15);

    Hid sat = open_dataset(file, "satellite");
    auto sd = dataset_dims(sat, "satellite");
    if (sd.size() != 4) throw DataError("dataset 'satellite': expected 4 dimensions");
    arc.satellite = Tensor({static_cast<long>(sd[0]), static_cast<long>(sd[1]),
                            static_cast<long>(sd[2]), static_cast<long>(sd[3])});
    if (H5Dread(sat, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, arc.satellite.data()) < 0)
        throw DataError("dataset 'satellite': read failed");

    Hid rad = open_dataset(file, "radar");
    auto rd = dataset_dims(rad, "radar");
    if (rd.size() != 3) throw DataError("dataset 'radar': expected 3 dimensions");
    if (rd[0] != sd[0])
        throw DataError("shape mismatch: radar has " + std::to_string(rd[0]) +
                        " slots, satellite has " + std::to_string(sd[0]));
    arc.radar =
        Tensor({static_cast<long>(rd[0]), static_cast<long>(rd[1]), static_cast<long>(rd[2])});
    if (H5Dread(rad, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, arc.radar.data()) < 0)
        throw DataError("dataset 'radar': read failed");

    Hid msk = open_dataset(file, "radar_valid");
    auto md = dataset_dims(msk, "radar_valid");
    if (md != rd) throw DataError("shape mismatch: radar_valid does not match radar");
    arc.radar_valid = Mask(arc.radar.shape());
    if (H5Dread(msk, H5T_NATIVE_UCHAR, H5S_ALL, H5S_ALL, H5P_DEFAULT, arc.radar_valid.data()) < 0)
        throw DataError("dataset 'radar_valid': read failed");

    Hid st = open_dataset(file, "static");
    auto td = dataset_dims(st, "static");
    if (td.size() != 3) throw DataError("dataset 'static': expected 3 dimensions");
    arc.static_fields =
        Tensor({static_cast<long>(td[0]), static_cast<long>(td[1]), static_cast<long>(td[2])});
    if (H5Dread(st, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, arc.static_fields.data()) < 0)
        throw DataError("dataset 'static': read failed");

    arc.validate();
    return arc;
}

struct ArchiveReader::Impl {
    Hid file;
    Hid satellite, radar, radar_valid, statics;
    std::string region_id;
    long n = 0, c = 0, p = 0;
    Tensor static_fields;  // small; cached eagerly
};

ArchiveReader::ArchiveReader(const std::string& path) : impl_(new Impl) {
    impl_->file = Hid(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!impl_->file.ok()) throw DataError("cannot open archive file: " + path);
    impl_->region_id = read_string_attr(impl_->file, "region_id");
    impl_->satellite = open_dataset(impl_->file, "satellite");
    impl_->radar = open_dataset(impl_->file, "radar");
    impl_->radar_valid = open_dataset(impl_->file, "radar_valid");
    impl_->statics = open_dataset(impl_->file, "static");
    auto sd = dataset_dims(impl_->satellite, "satellite");
    if (sd.size() != 4) throw DataError("dataset 'satellite': expected 4 dimensions");
    impl_->n = static_cast<long>(sd[0]);
    impl_->c = static_cast<long>(sd[1]);
    impl_->p = static_cast<long>(sd[3]);
    auto rd = dataset_dims(impl_->radar, "radar");
    if (rd.size() != 3 || rd[0] != sd[0])
        throw DataError("shape mismatch: radar slots do not match satellite");
    auto td = dataset_dims(impl_->statics, "static");
    impl_->static_fields = Tensor({static_cast<long>(td[0]), static_cast<long>(td[1]),
                                   static_cast<long>(td[2])});
    if (H5Dread(impl_->statics, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT,
                impl_->static_fields.data()) < 0)
        throw DataError("dataset 'static': read failed");
}

ArchiveReader::~ArchiveReader() = default;
ArchiveReader::ArchiveReader(ArchiveReader&&) noexcept = default;
ArchiveReader& ArchiveReader::operator=(ArchiveReader&&) noexcept = default;

const std::string& ArchiveReader::region_id() const { return impl_->region_id; }
long ArchiveReader::n_slots() const { return impl_->n; }
long ArchiveReader::patch() const { return impl_->p; }

SampleRecord ArchiveReader::materialize(int start_slot, const Geometry& geom) const {
    geom.validate();
    if (impl_->p != geom.patch)
        throw DataError("archive patch " + std::to_string(impl_->p) + " != geometry patch " +
                        std::to_string(geom.patch));
    if (start_slot < 0 || start_slot + geom.window() > impl_->n)
        throw DataError("materialize: window out of range");

    const hsize_t off = static_cast<hsize_t>(geom.input_offset());
    const hsize_t in = static_cast<hsize_t>(geom.input);

    SampleRecord rec;
    rec.region_id = impl_->region_id;
    rec.start_slot = start_slot;
    rec.input = Tensor({geom.in_len, geom.sat_channels, geom.input, geom.input});
    read_slab(impl_->satellite, H5T_NATIVE_FLOAT,
              {static_cast<hsize_t>(start_slot), 0, off, off},
              {static_cast<hsize_t>(geom.in_len), static_cast<hsize_t>(impl_->c), in, in},
              rec.input.data(), "satellite");

    rec.static_fields = Tensor({geom.static_channels, geom.input, geom.input});
    const long hw = geom.input;
    for (long c = 0; c < geom.static_channels; ++c)
        for (long i = 0; i < hw; ++i) {
            const float* src = &impl_->static_fields.at(c, geom.input_offset() + i, geom.input_offset());
            std::copy(src, src + hw, &rec.static_fields.at(c, i, 0l));
        }

    rec.target = Tensor({geom.out_len, geom.patch, geom.patch});
    rec.target_valid = Mask({geom.out_len, geom.patch, geom.patch});
    const hsize_t p = static_cast<hsize_t>(impl_->p);
    read_slab(impl_->radar, H5T_NATIVE_FLOAT,
              {static_cast<hsize_t>(start_slot + geom.in_len), 0, 0},
              {static_cast<hsize_t>(geom.out_len), p, p}, rec.target.data(), "radar");
    read_slab(impl_->radar_valid, H5T_NATIVE_UCHAR,
              {static_cast<hsize_t>(start_slot + geom.in_len), 0, 0},
              {static_cast<hsize_t>(geom.out_len), p, p}, rec.target_valid.data(), "radar_valid");
    return rec;
}

void save_tensor_h5(const std::string& path, const std::string& dataset, const Tensor& t) {
    Hid file(H5Fcreate(path.c_str(), H5F_ACC_TRUNC, H5P_DEFAULT, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw DataError("cannot create file: " + path);
    std::vector<hsize_t> dims;
    for (int d = 0; d < t.rank(); ++d) dims.push_back(static_cast<hsize_t>(t.dim(d)));
    write_dataset(file, dataset.c_str(), H5T_NATIVE_FLOAT, dims, dims, t.data());
}

Tensor load_tensor_h5(const std::string& path, const std::string& dataset) {
    Hid file(H5Fopen(path.c_str(), H5F_ACC_RDONLY, H5P_DEFAULT), H5Fclose);
    if (!file.ok()) throw DataError("cannot open file: " + path);
    Hid dset = open_dataset(file, dataset.c_str());
    auto dims = dataset_dims(dset, dataset.c_str());
    std::vector<long> shape(dims.begin(), dims.end());
    Tensor t(shape);
    if (H5Dread(dset, H5T_NATIVE_FLOAT, H5S_ALL, H5S_ALL, H5P_DEFAULT, t.data()) < 0)
        throw DataError("dataset '" + dataset + "': read failed");
    return t;
}

void ArchiveReader::read_radar_slot(long slot, float* rates, std::uint8_t* valid) const {
    if (slot < 0 || slot >= impl_->n) throw DataError("read_radar_slot: slot out of range");
    const hsize_t p = static_cast<hsize_t>(impl_->p);
    read_slab(impl_->radar, H5T_NATIVE_FLOAT, {static_cast<hsize_t>(slot), 0, 0}, {1, p, p}, rates,
              "radar");
    read_slab(impl_->radar_valid, H5T_NATIVE_UCHAR, {static_cast<hsize_t>(slot), 0, 0}, {1, p, p},
              valid, "radar_valid");
}

}  // namespace nowcast
