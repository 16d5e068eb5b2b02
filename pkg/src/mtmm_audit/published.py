"""Published reference values used for side-by-side comparison.

Printed values for the bundled Malik et al. (2010) studies and the
expected-maximum table, kept verbatim with their rounding and typos.
Nothing here is recomputed.
"""

from typing import NamedTuple, Optional


class OrderStatReference(NamedTuple):
    n: int
    expected_max: float
    p_value: float


ORDER_STATS = (
    OrderStatReference(10, 1.53875, 0.12211),
    OrderStatReference(20, 1.86748, 0.06976),
    OrderStatReference(30, 2.04276, 0.04952),
    OrderStatReference(40, 2.16078, 0.03864),
    OrderStatReference(50, 2.24907, 0.03181),
    OrderStatReference(60, 2.31928, 0.02709),
    OrderStatReference(70, 2.37736, 0.02364),
    OrderStatReference(80, 2.42677, 0.02099),
    OrderStatReference(90, 2.46970, 0.01890),
    OrderStatReference(100, 2.50759, 0.01720),
    OrderStatReference(125, 2.58634, 0.01407),
    OrderStatReference(150, 2.64925, 0.01194),
    OrderStatReference(175, 2.70148, 0.01038),
    OrderStatReference(200, 2.74604, 0.00919),
    OrderStatReference(225, 2.78485, 0.00826),
    OrderStatReference(250, 2.81918, 0.00750),
    OrderStatReference(300, 2.87777, 0.00635),
    OrderStatReference(350, 2.92651, 0.00551),
    OrderStatReference(400, 2.96818, 0.00487),
    OrderStatReference(1000, 3.24144, 0.00119),
    OrderStatReference(5000, 3.67755, 0.00024),
)


class ZTestReference(NamedTuple):
    row: str
    rr: float
    cl_low: float
    cl_high: float
    beta: float
    beta_se: float
    z: float
    # None where only "<0.0001" was printed
    prob: Optional[float]
    adj_factor: int
    adj_p: float


PROB_FLOOR = 0.0001

ZTESTS = (
    ZTestReference("Nettleton", 0.86, 0.62, 1.17, -0.151, 0.162, -0.931, 0.8241, 116736, 1.000),
    ZTestReference("Lutsey", 1.09, 0.99, 1.19, 0.086, 0.047, 1.836, 0.0332, 540672, 1.000),
    ZTestReference("Dhingra", 1.39, 1.21, 1.59, 0.329, 0.070, 4.726, None, 244, 0.000),
    ZTestReference("Montonen", 1.67, 0.98, 2.87, 0.513, 0.274, 1.871, 0.0307, 102400, 1.000),
    ZTestReference("Paynter", 1.17, 0.92, 1.39, 0.122, 0.157, 1.491, 0.0679, 244, 1.000),
    ZTestReference("Schulze", 1.83, 1.42, 2.36, 0.604, 0.130, 4.663, None, 2179072, 1.000),
    ZTestReference("Palmer", 1.24, 1.06, 1.45, 0.215, 0.080, 2.692, 0.0036, 2228224, 1.000),
    ZTestReference("Bazzano", 1.31, 0.99, 1.74, 0.270, 0.144, 1.877, 0.0303, 11264, 1.000),
    ZTestReference("Odegaard", 1.42, 1.25, 1.62, 0.351, 0.066, 5.301, None, 1351680, 0.078),
    ZTestReference("de Koning", 1.14, 1.03, 1.28, 0.131, 0.055, 2.364, 0.0090, 8384, 1.000),
    ZTestReference("Nettleton*", 1.15, 0.92, 1.42, 0.140, 0.111, 1.262, 0.1034, 116736, 1.000),
)

# Printed search-space sizes: (study, source) -> value
SEARCH_SPACES = {
    ("Nettleton", "abstract"): 24, ("Lutsey", "abstract"): 32, ("Dhingra", "abstract"): 7168,
    ("Montonen", "abstract"): 5, ("Paynter", "abstract"): 2, ("Schulze", "abstract"): 8,
    ("Palmer", "abstract"): 4, ("Bazzano", "abstract"): 3, ("Odegaard", "abstract"): 8,
    ("de Koning", "abstract"): 12288,
    ("Nettleton", "text"): 196608, ("Lutsey", "text"): 32678, ("Dhingra", "text"): 117117952,
    ("Montonen", "text"): 392396, ("Paynter", "text"): 32678, ("Schulze", "text"): 3072,
    ("Palmer", "text"): 196608, ("Bazzano", "text"): 40960, ("Odegaard", "text"): 262144,
    ("de Koning", "text"): 6291456,
}

N_TESTS = {
    "Nettleton": 88, "Lutsey": 85, "Dhingra": 101, "Montonen": 63, "Paynter": 60,
    "Schulze": 54, "Palmer": 87, "Bazzano": 114, "Odegaard": 50, "de Koning": 84,
}
