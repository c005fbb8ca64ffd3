"""Dealer, reconstruction and post-hoc share verification.

One chain is dealt per minimal authorized subset Omega.  The dealer
samples a secret matrix S with det(S) = k (a generator of Z_p^*), puts
the members of Omega in a random order along a chain of trapdoor
matrices A_1 .. A_{|Omega|+1}, and links consecutive matrices with
small encodings

    D_i A_i = A_{i+1} S^{e_i} + E_i   (mod q),

where the exponents e_i sum to 0 mod (p-1) before one randomly chosen
member's exponent is raised by one.  Multiplying the encodings along the
chain telescopes to a single LWE instance of A_term S^{sum+1}, so any
coalition holding every link recovers M = prod S^{e_i} exactly and reads
the secret off as det(M) = k^{c(p-1)+1} = k mod p.

Hidden membership and the keys to the terminal trapdoor both ride on
access-structure tokens: every authorized coalition, and only those,
intersects its tokens to one fixed identifier set, and the header
carrying the chain order, the exponents and the terminal trapdoor is
encrypted under a key derived from exactly that set.  Parties outside
the chain receive decoy matrices and encodings drawn from the same
marginal distributions, and every bundle is padded to one byte length.

Verification is communication free and runs after reconstruction: for
each chain position j the suffix product D_last ... D_j A_j is inverted
with the terminal trapdoor and det must step by k^{e_j} from the suffix
above it.  A forged encoding survives one such check only if its decode
happens to land on the right determinant residue, roughly a 1/(p-1)
fluke per check.
"""

from __future__ import annotations

import hashlib
import hmac as hmac_mod
import math
from dataclasses import dataclass

import numpy as np

from . import serial
from .lattice import (
    InversionError,
    LweParams,
    TrapdoorMatrix,
    det_int,
    find_q,
    lwe_invert,
    matmul_mod,
    matrix_power_mod,
    sample_dgauss,
    sample_preimage_batch,
    sample_prim_secret,
    trapdoor_gen,
)
from .numt import is_primitive_root
from .rng import named_stream
from .tokens import (
    TokenPack,
    combine_tokens,
    default_token_systems,
    encode_access_structure,
    membership_test,
)


class VssError(Exception):
    pass


class UnauthorizedError(VssError):
    """The coalition's tokens do not certify any dealt access structure."""


class ShareCorruptionError(VssError):
    """An authorized coalition's encodings failed to invert within bounds."""


class HeaderUnavailableError(VssError):
    """Verification requested before any instance header could be opened."""


@dataclass(frozen=True)
class Secret:
    k: int
    p: int

    def __post_init__(self):
        if not is_primitive_root(self.k, self.p):
            raise ValueError(f"{self.k} does not generate Z_{self.p}^*")


@dataclass(frozen=True)
class VssParams:
    lwe: LweParams
    token_m: int = 39
    token_m_prime: int = 195
    token_n: int = 3
    token_l: int = 2
    share_rho_half: bool = True       # exponent 1/2 in the share-size bound
    share_c_h: int = 8

    @classmethod
    def desk(cls, p: int = 31, q_bits: int = 30, n: int = 4, **kw) -> "VssParams":
        return cls(LweParams(n=n, p=p, q=find_q(p, q_bits)), **kw)

    def to_doc(self) -> dict:
        return {
            "n": self.lwe.n, "p": self.lwe.p, "q": self.lwe.q,
            "lam": self.lwe.lam, "c_bound_milli": int(self.lwe.c_bound * 1000),
            "resample_cap": self.lwe.resample_cap, "prim_cap": self.lwe.prim_cap,
            "token_m": self.token_m, "token_m_prime": self.token_m_prime,
            "token_n": self.token_n, "token_l": self.token_l,
            "share_rho_half": self.share_rho_half, "share_c_h": self.share_c_h,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "VssParams":
        lwe = LweParams(n=doc["n"], p=doc["p"], q=doc["q"], lam=doc["lam"],
                        c_bound=doc["c_bound_milli"] / 1000,
                        resample_cap=doc.get("resample_cap", 64),
                        prim_cap=doc.get("prim_cap", 200_000))
        return cls(lwe, token_m=doc["token_m"], token_m_prime=doc["token_m_prime"],
                   token_n=doc["token_n"], token_l=doc["token_l"],
                   share_rho_half=doc["share_rho_half"], share_c_h=doc["share_c_h"])


@dataclass
class InstanceShare:
    instance_id: str
    token: TokenPack
    a_matrix: np.ndarray       # (w, n): chain matrix or decoy
    d_matrix: np.ndarray       # (w, w): encoding or decoy
    header_ct: bytes

    def to_doc(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "token": sorted(self.token.elements),
            "a": serial.matrix_doc(self.a_matrix),
            "d": serial.matrix_doc(self.d_matrix),
            "header_ct": self.header_ct.hex(),
        }

    @classmethod
    def from_doc(cls, doc: dict, party: int) -> "InstanceShare":
        try:
            return cls(
                instance_id=doc["instance_id"],
                token=TokenPack(party, frozenset(doc["token"]), doc["instance_id"]),
                a_matrix=serial.doc_matrix(doc["a"]),
                d_matrix=serial.doc_matrix(doc["d"]),
                header_ct=bytes.fromhex(doc["header_ct"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise serial.SerializationError(f"malformed instance share: {exc}") from exc


@dataclass
class ShareBundle:
    party: int
    params: VssParams
    instances: list[InstanceShare]
    pad: str = ""

    def instance(self, instance_id: str) -> InstanceShare:
        for inst in self.instances:
            if inst.instance_id == instance_id:
                return inst
        raise KeyError(instance_id)

    def to_doc(self) -> dict:
        return {
            "party": self.party,
            "params": self.params.to_doc(),
            "instances": [i.to_doc() for i in self.instances],
            "pad": self.pad,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "ShareBundle":
        try:
            party = int(doc["party"])
            params = VssParams.from_doc(doc["params"])
            instances = [InstanceShare.from_doc(d, party) for d in doc["instances"]]
        except serial.SerializationError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise serial.SerializationError(f"malformed share bundle: {exc}") from exc
        return cls(party=party, params=params, instances=instances,
                   pad=doc.get("pad", ""))


# ---------------------------------------------------------------------------
# header encryption: hash KDF, xor keystream, MAC; deterministic per key/nonce


def _kdf(element_ids, purpose: bytes) -> bytes:
    h = hashlib.sha256()
    h.update(b"veilshare.header.v1|" + purpose + b"|")
    h.update(",".join(str(i) for i in sorted(element_ids)).encode())
    return h.digest()


def _keystream(key: bytes, nonce: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out.extend(hashlib.sha256(key + nonce + counter.to_bytes(8, "little")).digest())
        counter += 1
    return bytes(out[:length])


def seal_header(element_ids, nonce: str, plaintext: bytes) -> bytes:
    enc_key = _kdf(element_ids, b"enc")
    mac_key = _kdf(element_ids, b"mac")
    ct = bytes(a ^ b for a, b in zip(plaintext,
                                     _keystream(enc_key, nonce.encode(), len(plaintext))))
    tag = hmac_mod.new(mac_key, nonce.encode() + ct, hashlib.sha256).digest()
    return ct + tag


def open_header(element_ids, nonce: str, sealed: bytes) -> bytes:
    if len(sealed) < 32:
        raise VssError("header too short")
    ct, tag = sealed[:-32], sealed[-32:]
    mac_key = _kdf(element_ids, b"mac")
    want = hmac_mod.new(mac_key, nonce.encode() + ct, hashlib.sha256).digest()
    if not hmac_mod.compare_digest(tag, want):
        raise VssError("header authentication failed")
    enc_key = _kdf(element_ids, b"enc")
    return bytes(a ^ b for a, b in zip(ct, _keystream(enc_key, nonce.encode(), len(ct))))


# ---------------------------------------------------------------------------
# dealing


def _draw_exponents(rng: np.random.Generator, count: int, p: int) -> list[int]:
    """count exponents in [1, p-2] summing to 0 mod p-1, then one raised by 1."""
    if count == 1:
        exps = [p - 1]
    else:
        while True:
            exps = [int(rng.integers(1, p - 1)) for _ in range(count - 1)]
            last = (-sum(exps)) % (p - 1)
            if 1 <= last <= p - 2:
                exps.append(last)
                break
    exps[int(rng.integers(0, count))] += 1
    return exps


def _sample_error(rng: np.random.Generator, params: LweParams, shape) -> np.ndarray:
    for _ in range(64):
        e = sample_dgauss(rng, params.s, shape)
        if int(np.abs(e).max()) < params.error_cap:
            return e
    raise VssError("error sampling cap exceeded")


def _validate_gamma0(gamma0, parties: int) -> list[tuple[int, ...]]:
    cleaned = []
    for omega in gamma0:
        o = tuple(sorted(set(int(v) for v in omega)))
        if not o or o[0] < 1 or o[-1] > parties:
            raise VssError("each minimal subset must be a nonempty subset of 1..parties")
        cleaned.append(o)
    if not cleaned:
        raise VssError("need at least one minimal authorized subset")
    for a in cleaned:
        for b in cleaned:
            if a is not b and set(a) <= set(b):
                raise VssError(f"{b} is not minimal: it contains {a}")
    return cleaned


def deal(secret: Secret, gamma0, parties: int, params: VssParams,
         seed: int) -> list[ShareBundle]:
    """Produce one padded ShareBundle per party for cl(gamma0)."""
    if secret.p != params.lwe.p:
        raise VssError("secret prime does not match the parameter prime")
    gamma0 = _validate_gamma0(gamma0, parties)
    lwe = params.lwe
    p, q, n = lwe.p, lwe.q, lwe.n
    h_sys, h_prime_sys = default_token_systems(
        params.token_m, params.token_m_prime, params.token_n, params.token_l)

    per_party: dict[int, list[InstanceShare]] = {i: [] for i in range(1, parties + 1)}
    for idx, omega in enumerate(gamma0):
        tag_rng = named_stream(seed, "vss", "tag", idx)
        tag = bytes(tag_rng.integers(0, 256, size=6, dtype=np.uint8)).hex()
        inst_id = f"chain-{idx:03d}-{tag}"
        rng = named_stream(seed, "vss", inst_id)
        instance = encode_access_structure(parties, omega, h_sys, h_prime_sys, rng,
                                           instance_id=inst_id)

        order = [int(v) for v in rng.permutation(np.array(omega))]
        exps = _draw_exponents(rng, len(order), p)
        s_secret = sample_prim_secret(n, p, rng, det_value=secret.k,
                                      max_tries=lwe.prim_cap)
        s_pows = [matrix_power_mod(s_secret.S, e, p) for e in exps]

        product = np.eye(n, dtype=object)
        for s_pow in s_pows:
            product = s_pow.astype(object) @ product
        if max(abs(int(v)) for v in product.flat) >= q:
            raise VssError("chain too long for q: secret product entries reach q")

        chain = [trapdoor_gen(lwe, rng=rng) for _ in range(len(order) + 1)]
        outsiders = [party for party in range(1, parties + 1) if party not in omega]
        decoys = {party: trapdoor_gen(lwe, rng=rng) for party in outsiders}

        link_targets = []
        for pos in range(len(order)):
            e_mat = _sample_error(rng, lwe, (lwe.w, n))
            link_targets.append(np.asarray(
                np.mod(matmul_mod(chain[pos + 1].A, s_pows[pos], q) + e_mat, q),
                dtype=np.int64))
        decoy_targets = {party: rng.integers(0, q, size=(lwe.w, n), dtype=np.int64)
                         for party in outsiders}
        encodings = sample_preimage_batch(
            [chain[pos] for pos in range(len(order))] + [decoys[p] for p in outsiders],
            link_targets + [decoy_targets[p] for p in outsiders], rng,
            max_resample=lwe.resample_cap)
        d_mats = encodings[: len(order)]
        decoy_d = dict(zip(outsiders, encodings[len(order):]))

        header_payload = {
            "order": order,
            "exponents": exps,
            "a_term": serial.matrix_doc(chain[-1].A),
            "r_term": serial.matrix_doc(chain[-1].R),
        }
        header_bytes = serial.serialize("reconstruction", header_payload)
        key_ids = instance.authorized_element_ids()
        sealed = seal_header(key_ids, inst_id, header_bytes)

        for party in range(1, parties + 1):
            token = instance.token_for(party)
            if party in omega:
                pos = order.index(party)
                a_mat, d_mat = chain[pos].A, d_mats[pos]
            else:
                a_mat, d_mat = decoys[party].A, decoy_d[party]
            per_party[party].append(
                InstanceShare(inst_id, token, a_mat, d_mat, sealed))

    bundles = [ShareBundle(party, params, per_party[party])
               for party in range(1, parties + 1)]
    serialize_bundles(bundles)     # fixes pads so byte lengths agree
    return bundles


def serialize_bundles(bundles: list[ShareBundle]) -> list[bytes]:
    docs = [b.to_doc() for b in bundles]
    blobs = serial.equalize_lengths(docs, "share-bundle")
    for bundle, doc in zip(bundles, docs):
        bundle.pad = doc["pad"]
    return blobs


# ---------------------------------------------------------------------------
# reconstruction


def _instance_ids(bundles: list[ShareBundle]) -> list[str]:
    """Shared instance ids; bundles must come from one dealing."""
    per_bundle = [sorted(i.instance_id for i in b.instances) for b in bundles]
    if any(ids != per_bundle[0] for ids in per_bundle[1:]):
        raise VssError("bundles disagree on instances: not from one dealing")
    if any(b.params.to_doc() != bundles[0].params.to_doc() for b in bundles[1:]):
        raise VssError("bundles disagree on parameters: not from one dealing")
    return per_bundle[0]


def _open_instance(bundles: list[ShareBundle], instance_id: str):
    """Token-test one instance.

    Returns ("unauthorized", None, None), ("corrupt", None, None) when the
    size test passes but the header fails to authenticate, or
    ("ok", header payload, shares by party).
    """
    shares = {b.party: b.instance(instance_id) for b in bundles}
    packs = [s.token for s in shares.values()]
    combined = combine_tokens(packs)
    params = bundles[0].params
    if not membership_test(combined, params.token_m, params.token_m_prime):
        return "unauthorized", None, None
    try:
        header_bytes = open_header(tuple(sorted(combined)), instance_id,
                                   shares[bundles[0].party].header_ct)
        payload = serial.deserialize(header_bytes, "reconstruction")
    except (VssError, serial.SerializationError):
        return "corrupt", None, None
    return "ok", payload, shares


def _terminal_trapdoor(params: VssParams, header: dict) -> TrapdoorMatrix:
    return TrapdoorMatrix(params.lwe,
                          serial.doc_matrix(header["a_term"]),
                          serial.doc_matrix(header["r_term"]),
                          np.eye(params.lwe.n, dtype=np.int64))


def reconstruct(bundles: list[ShareBundle]) -> Secret:
    """Recover the secret for an authorized coalition of bundles.

    Raises UnauthorizedError when no dealt instance certifies the
    coalition, ShareCorruptionError when certification succeeds but the
    chain fails to invert within bounds.
    """
    if not bundles:
        raise UnauthorizedError("empty coalition")
    params = bundles[0].params
    q, p = params.lwe.q, params.lwe.p
    corruption: object = None
    certified = False
    for instance_id in _instance_ids(bundles):
        status, header, shares = _open_instance(bundles, instance_id)
        if status == "unauthorized":
            continue
        certified = True
        if status == "corrupt":
            corruption = "header failed to authenticate"
            continue
        order = header["order"]
        try:
            x = shares[order[0]].a_matrix % q
            for party in order:
                x = np.asarray(matmul_mod(shares[party].d_matrix, x, q), dtype=np.int64)
            m_mat, _ = lwe_invert(_terminal_trapdoor(params, header), x)
        except InversionError as exc:
            corruption = exc
            continue
        try:
            return Secret(det_int(m_mat) % p, p)
        except ValueError as exc:
            # a clean inversion must telescope to a generator; anything else
            # means the dealing itself was inconsistent
            corruption = exc
            continue
    if certified:
        raise ShareCorruptionError(f"authorized but inversion failed: {corruption}")
    raise UnauthorizedError("coalition tokens certify no dealt access structure")


# ---------------------------------------------------------------------------
# verification


def verify_shares(bundles: list[ShareBundle], secret: Secret) -> dict[int, int]:
    """Per-party verdict map: 1 iff every determinant step involving the
    party's encoding is consistent with the claimed secret.

    Requires an authorized coalition (the headers decrypt only then);
    parties whose shares sit outside every opened chain have nothing to
    check and verdict 1.  The map is a pure function of bundles and k.
    """
    if not bundles:
        raise HeaderUnavailableError("no bundles supplied")
    params = bundles[0].params
    q, p = params.lwe.q, params.lwe.p
    verdicts = {b.party: 1 for b in bundles}
    opened_any = False
    for instance_id in _instance_ids(bundles):
        status, header, shares = _open_instance(bundles, instance_id)
        if status != "ok":
            continue
        opened_any = True
        order, exps = header["order"], header["exponents"]
        trap = _terminal_trapdoor(params, header)
        k_chain = len(order)

        suffix_det = {k_chain: 1}       # det of S-power product strictly above j
        for j in range(k_chain - 1, -1, -1):
            x = shares[order[j]].a_matrix % q
            for pos in range(j, k_chain):
                x = np.asarray(matmul_mod(shares[order[pos]].d_matrix, x, q),
                               dtype=np.int64)
            m_mat, _ = lwe_invert(trap, x, check=False)
            suffix_det[j] = det_int(m_mat) % p

        for j in range(k_chain):
            expected = suffix_det[j + 1] * pow(secret.k, exps[j], p) % p
            if suffix_det[j] != expected:
                verdicts[order[j]] = 0
    if not opened_any:
        raise HeaderUnavailableError(
            "no instance header opened: verification runs only after the "
            "coalition could reconstruct")
    return verdicts


# ---------------------------------------------------------------------------
# share-size bound


def isqrt_ceil(x: int) -> int:
    r = math.isqrt(x)
    return r if r * r == x else r + 1


def max_share_size(parties: int, q: int, h: int, rho: float = 0.5,
                   c_h: int = 8) -> int:
    """Byte bound binom(l, l/2) * (sqrt(q) (2 q^rho + 1) + c_h * h).

    rho in {0.5, 1} is evaluated in exact integers; other exponents use
    a ceiling on the float power.
    """
    if rho > 1:
        raise ValueError("rho must be at most 1")
    if rho == 0.5:
        q_rho = isqrt_ceil(q)
    elif rho == 1:
        q_rho = q
    else:
        q_rho = math.ceil(q**rho)
    return math.comb(parties, parties // 2) * (isqrt_ceil(q) * (2 * q_rho + 1) + c_h * h)
