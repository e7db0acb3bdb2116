from mpmath import mp, mpf, log, diff, quad, exp, nsum, inf
mp.dps = 40
def kr(lu, ll):
    return 1/log(2-mpf(lu),2), -1/log(mpf(ll),2)
def jc(u,v,lu,ll):
    k,r = kr(lu,ll); u=mpf(u); v=mpf(v)
    x = (1-(1-u)**k)**(-r) + (1-(1-v)**k)**(-r) - 1
    return 1 - (1 - x**(-1/r))**(1/k)
def sjc(u,v,lu,ll):
    u=mpf(u);v=mpf(v)
    return (jc(u,v,lu,ll)+jc(1-u,1-v,ll,lu)+u+v-1)/2
print("kr(0.158,0.014)", kr(0.158,0.014))
print("kr(0.5,0.5)", kr(0.5,0.5))
print("jc(0.5,0.5|0.3,0.2)", jc(0.5,0.5,0.3,0.2))
print("sjc(0.25,0.75|0.3,0.1)", sjc(0.25,0.75,0.3,0.1))
print("jcpdf(0.5,0.5|0.3,0.2)", diff(lambda a,b: jc(a,b,0.3,0.2),(0.5,0.5),(1,1)))
print("sjcpdf(0.9,0.9|0.6,0.1)", diff(lambda a,b: sjc(a,b,0.6,0.1),(0.9,0.9),(1,1)))
print("sjcpdf(0.1,0.1|0.6,0.1)", diff(lambda a,b: sjc(a,b,0.6,0.1),(0.1,0.1),(1,1)))
print("h(0.5|0.5;0.3,0.1)", diff(lambda a: sjc(a,0.5,0.3,0.1),0.5))
print("sjcpdf(0.3,0.7|0.3,0.1)", diff(lambda a,b: sjc(a,b,0.3,0.1),(0.3,0.7),(1,1)))
n=100; D=mpf('0.136')
print("ks p", 2*nsum(lambda k: (-1)**(k-1)*exp(-2*k*k*n*D*D),[1,inf]))
for lu,ll in [(0.3,0.1),(0.6,0.4)]:
  q=mpf('0.999')
  print("finite-q tails", lu,ll, (1-2*q+sjc(q,q,lu,ll))/(1-q), sjc(1-q,1-q,lu,ll)/(1-q))
