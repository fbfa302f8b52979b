"""rollread: overlapped block prefetching for sequential reads from object
storage, with a cost model, a lazy .trk parser, and a benchmark harness."""

from .cache import (
    BlockKey,
    BlockRecord,
    BlockState,
    CacheLocation,
    block_path,
    choose_location,
    parse_size,
    parse_tier_spec,
    validate_tiers,
    write_block,
)
from .errors import (
    BadHeaderSizeError,
    BadMagicError,
    BlockIOError,
    CorruptCountError,
    EmptyFileError,
    InconsistentCountsError,
    InvalidFileSetError,
    ObjectNotFound,
    OutOfRangeError,
    RollreadError,
    SingularAffineError,
    StorageConfigError,
    StorageFullError,
    TransportError,
    TrkFormatError,
    TruncatedRecordError,
    UnsupportedVersionError,
)
from .evict import EvictionPlan, EvictionReport, get_all_blocks, run_evictor
from .fileset import FileSet
from .model import (
    ModelParams,
    asymptote_gap,
    optimal_blocks,
    speedup,
    t_cloud,
    t_comp,
    t_pf,
    t_seq,
)
from .prefetch import (
    PrefetchConfig,
    PrefetchReport,
    PrefetchState,
    fetch_next_block,
    run_prefetch,
)
from .reader import PrefetchStream, ReadReport, open_stream
from .store import (
    ObjectRef,
    ObjectStore,
    S3Store,
    SimStore,
    SimStoreParams,
    open_store,
    sim_delay,
)

__version__ = "0.1.0"

__all__ = [
    "BlockKey",
    "BlockRecord",
    "BlockState",
    "CacheLocation",
    "EvictionPlan",
    "EvictionReport",
    "FileSet",
    "ModelParams",
    "ObjectRef",
    "ObjectStore",
    "PrefetchConfig",
    "PrefetchReport",
    "PrefetchState",
    "PrefetchStream",
    "ReadReport",
    "RollreadError",
    "S3Store",
    "SimStore",
    "SimStoreParams",
    "asymptote_gap",
    "block_path",
    "choose_location",
    "fetch_next_block",
    "get_all_blocks",
    "open_store",
    "open_stream",
    "optimal_blocks",
    "parse_size",
    "parse_tier_spec",
    "run_evictor",
    "run_prefetch",
    "sim_delay",
    "speedup",
    "t_cloud",
    "t_comp",
    "t_pf",
    "t_seq",
    "validate_tiers",
    "write_block",
]
