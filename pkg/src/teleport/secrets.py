"""Pre-shared secret matrices of MAC addresses and datapath ids."""

import hashlib
from functools import cached_property
from typing import Dict, List, Optional, Tuple

from ..protocol.messages import MacAddr
from ..utils.errors import OutOfRange

DEFAULT_SALT = "teleport"


class SecretMatrix:
    """
    ``m x m`` identities shared by the colluding agents.

    Entry (i, j) packs the 16-bit indices into the low four octets and masks
    them with a salt-derived pad, so the map is injective for any salt. The
    first octet always has the locally-administered bit set and the
    multicast bit clear.
    """

    def __init__(self, m: int, salt: str = DEFAULT_SALT):
        if not 1 <= m <= 0xFFFF:
            raise ValueError(f"matrix size must be in [1, 65535], got {m}")
        self.m = m
        self.salt = salt

    def __repr__(self) -> str:
        return f"SecretMatrix(m={self.m}, salt={self.salt!r})"

    def _check(self, i: int, j: int) -> None:
        if not (1 <= i <= self.m and 1 <= j <= self.m):
            raise OutOfRange(f"index ({i}, {j}) outside [1, {self.m}]")

    @staticmethod
    def _derive(pad: bytes, i: int, j: int) -> bytes:
        index = ((i << 16) | j).to_bytes(4, "big")
        low = bytes(a ^ b for a, b in zip(index, pad[2:6]))
        return bytes([(pad[0] & 0xFC) | 0x02, pad[1]]) + low

    @cached_property
    def _mac_pad(self) -> bytes:
        return hashlib.sha256(self.salt.encode("utf-8")).digest()

    @cached_property
    def _dpid_pad(self) -> bytes:
        return hashlib.sha256(f"{self.salt}:dpid".encode("utf-8")).digest()

    def mac(self, i: int, j: int) -> MacAddr:
        self._check(i, j)
        return MacAddr(self._derive(self._mac_pad, i, j))

    def dpid(self, i: int, j: int) -> int:
        self._check(i, j)
        return int.from_bytes(self._derive(self._dpid_pad, i, j), "big")

    @cached_property
    def _mac_index(self) -> Dict[MacAddr, Tuple[int, int]]:
        return {self.mac(i, j): (i, j) for i in range(1, self.m + 1) for j in range(1, self.m + 1)}

    @cached_property
    def _dpid_index(self) -> Dict[int, Tuple[int, int]]:
        return {self.dpid(i, j): (i, j) for i in range(1, self.m + 1) for j in range(1, self.m + 1)}

    def locate_mac(self, mac: MacAddr) -> Optional[Tuple[int, int]]:
        return self._mac_index.get(mac)

    def locate_dpid(self, dpid: int) -> Optional[Tuple[int, int]]:
        return self._dpid_index.get(dpid)

    def row_and_column(self, i: int) -> List[Tuple[int, int]]:
        """Indices of row i then column i, without repeating (i, i)."""
        self._check(i, i)
        cells = [(i, j) for j in range(1, self.m + 1)]
        cells += [(j, i) for j in range(1, self.m + 1) if j != i]
        return cells


def secret_mac(matrix: SecretMatrix, i: int, j: int) -> MacAddr:
    return matrix.mac(i, j)


def secret_dpid(matrix: SecretMatrix, i: int, j: int) -> int:
    return matrix.dpid(i, j)
