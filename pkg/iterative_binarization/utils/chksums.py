import hashlib
import json
import logging

from iterative_binarization import exceptions as exc

log = logging.getLogger(__name__)


def sha256sum_from_fo(fo):
    block_size = 65536
    sha256 = hashlib.sha256()
    for block in iter(lambda: fo.read(block_size), b""):
        sha256.update(block)
    return sha256.hexdigest()


def sha256sum_from_path(filename):
    with open(filename, "rb") as fo:
        return sha256sum_from_fo(fo)


def sha256sum_from_data(data):
    """Digest of a JSON-serializable description, independent of key order."""
    payload = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def check_file_chksum(path, expected_sha256):
    """Check that the sha256sum of the file at path matches expected_sha256.

    Raises:
        DataError: If the file is missing or its contents changed.

    Returns:
        bool: True if the check is ok, otherwise should raise exception
    """
    log.debug("checking %s", path)
    try:
        actual = sha256sum_from_path(path)
    except FileNotFoundError:
        raise exc.DataError(f"The file ({path}) was not found")

    if actual != expected_sha256:
        err_msg = (
            f"File {path} sha256sum should be {expected_sha256} "
            f"but the actual sha256sum was {actual}"
        )
        log.error(err_msg)
        raise exc.DataError(err_msg)
    return True
