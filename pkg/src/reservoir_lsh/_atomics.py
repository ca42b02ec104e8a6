"""Atomic array operations for nogil numba kernels.

numba exposes no CPU atomics, so these emit LLVM ``cmpxchg``/``atomicrmw``
directly. All orderings are sequentially consistent.
"""

from numba.core import cgutils
from numba.extending import intrinsic


def _element_pointer(context, builder, aryty, ary, idx):
    ary = context.make_array(aryty)(context, builder, ary)
    return cgutils.get_item_pointer(context, builder, aryty, ary, [idx])


@intrinsic
def compare_and_swap(typingctx, arr, idx, expected, new):
    """Set ``arr[idx] = new`` if it equals ``expected``; return the old value."""

    def codegen(context, builder, sig, args):
        ary, i, e, n = args
        ptr = _element_pointer(context, builder, sig.args[0], ary, i)
        res = builder.cmpxchg(ptr, e, n, "seq_cst", "seq_cst")
        return builder.extract_value(res, 0)

    return arr.dtype(arr, idx, arr.dtype, arr.dtype), codegen


@intrinsic
def fetch_add(typingctx, arr, idx, val):
    """Atomically add ``val`` to ``arr[idx]`` and return the previous value."""

    def codegen(context, builder, sig, args):
        ary, i, v = args
        ptr = _element_pointer(context, builder, sig.args[0], ary, i)
        return builder.atomic_rmw("add", ptr, v, "seq_cst")

    return arr.dtype(arr, idx, arr.dtype), codegen


@intrinsic
def atomic_store(typingctx, arr, idx, val):
    def codegen(context, builder, sig, args):
        ary, i, v = args
        ptr = _element_pointer(context, builder, sig.args[0], ary, i)
        return builder.atomic_rmw("xchg", ptr, v, "seq_cst")

    return arr.dtype(arr, idx, arr.dtype), codegen
