"""macroforge: macro-compacting assembler, byte-string compactor, and VM
for the MCRL interpretive bytecode."""

from .greedy import (
    MACRO_CODE_HI,
    MACRO_CODE_LO,
    MAX_MACROS,
    CompactionResult,
    Macro,
    best_single_macro,
    build_freq_table,
    count_occurrences,
    expand_macros,
    greedy_select,
    length_function,
    single_macro_objective,
    substitute,
)
from .optimal import (
    BudgetError,
    CostEstimate,
    Occurrence,
    brute_force_select,
    enumerate_occurrences,
    estimate_cost,
    exact_select,
    mwis,
)
from .asm import AsmError, LayoutError, assemble
from .disasm import DisasmError, disassemble, render_listing, render_source
from .macros import (
    apply_macro_set,
    compact_source,
    compact_stream,
    select_by_instruction_frequency,
)
from .objfile import MacroEntry, ObjectError, ObjectImage
from .vm import LoadError, RunOutcome, VmFault, load, run

__version__ = "0.1.0"
