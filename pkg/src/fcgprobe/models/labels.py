"""Class label constants. The positive class for every score is benign."""

MALWARE = 1
BENIGN = 0

NAMES = {MALWARE: "malware", BENIGN: "benign"}
