navigator.clipboard.writeText(result);
