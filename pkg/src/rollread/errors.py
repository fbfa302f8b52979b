"""Exception hierarchy for the rollread package."""


class RollreadError(Exception):
    """Base class for all rollread errors."""


# --- store / transport ---------------------------------------------------

class TransportError(RollreadError):
    """Network or backend failure while talking to an object store."""


class ObjectNotFound(RollreadError):
    """The requested key does not exist in the store."""


class OutOfRangeError(RollreadError):
    """Offset at or past the end of an object, or an invalid seek target."""


# --- cache / streaming ----------------------------------------------------

class StorageFullError(RollreadError):
    """A block write found less free space than the caller checked for."""


class StorageConfigError(RollreadError):
    """Cache tier configuration cannot support the requested block size."""


class InvalidFileSetError(RollreadError):
    """A file set is empty or otherwise unusable."""


class BlockIOError(RollreadError):
    """A cached block file could not be read back or cleaned up."""


# --- trk format -------------------------------------------------------------

class TrkFormatError(RollreadError):
    """Base class for streamline-file format errors."""


class BadMagicError(TrkFormatError):
    """File does not start with the TRACK magic."""


class BadHeaderSizeError(TrkFormatError):
    """Header is not exactly 1000 bytes, or the hdr_size field disagrees."""


class UnsupportedVersionError(TrkFormatError):
    """Only version 2 files are supported."""


class TruncatedRecordError(TrkFormatError):
    """Data ran out in the middle of a streamline record."""


class CorruptCountError(TrkFormatError):
    """A record declared a non-positive or absurdly large point count."""


class EmptyFileError(TrkFormatError):
    """An operation that needs at least one streamline found none."""


class InconsistentCountsError(TrkFormatError):
    """Streamline scalar/property shapes disagree with the header."""


class SingularAffineError(TrkFormatError):
    """The voxel-to-world affine is unusable (bad last row or voxel sizes)."""
